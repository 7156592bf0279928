"""Isothermal mass-action reaction mechanisms compiled to vector-field models.

Mechanism files are JSON documents:

    {
      "units": {"A_units": "...", "Ea_units": "kJ/mol", "conc": "mol/cm3"},
      "temperature_K": 3000.0,
      "species": [{"name": "H2", "composition": {"H": 2}}, ...],
      "reactions": [
        {"reactants": {"O": 1, "H2": 1},
         "products": {"H": 1, "OH": 1},
         "third_body": false,
         "forward": {"A": 5.08e4, "b": 2.7, "Ea": 26.317},
         "reverse": null},
        ...
      ]
    }

State vectors are species concentrations in mol/cm^3. Rate constants follow
the modified Arrhenius law k(T) = A * T^b * exp(-Ea / (R*T)) with Ea in
kJ/mol. Reverse rate constants must be given explicitly; ``reverse: null``
marks a reaction irreversible (no equilibrium thermochemistry is inferred).
Third-body concentration [M] is the total concentration with unit
efficiencies for all species.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import MechanismValidation, SchemaMismatch
from .models import ModelSpec

#: Gas constant in kJ mol^-1 K^-1, matching Ea given in kJ/mol.
GAS_CONSTANT_KJ = 8.314462618e-3


@dataclass(frozen=True)
class Arrhenius:
    A: float
    b: float
    Ea: float

    def rate_constant(self, T):
        """Modified Arrhenius rate constant at temperature T (kelvin)."""
        return self.A * T ** self.b * np.exp(-self.Ea / (GAS_CONSTANT_KJ * T))


@dataclass(frozen=True)
class Reaction:
    reactants: Dict[str, int]
    products: Dict[str, int]
    third_body: bool
    forward: Arrhenius
    reverse: Optional[Arrhenius]  # None means irreversible

    def label(self):
        def side(st):
            return " + ".join(f"{n if n > 1 else ''}{s}".strip()
                              for s, n in sorted(st.items()))
        arrow = "->" if self.reverse is None else "<=>"
        m = " + M" if self.third_body else ""
        return f"{side(self.reactants)}{m} {arrow} {side(self.products)}{m}"


@dataclass
class Mechanism:
    species: List[str]
    composition: Dict[str, Dict[str, int]]  # species -> element -> count
    reactions: List[Reaction]
    temperature: float
    units: Dict[str, str]

    @property
    def elements(self):
        seen = []
        for sp in self.species:
            for el in self.composition[sp]:
                if el not in seen:
                    seen.append(el)
        return seen

    def composition_matrix(self):
        """Rows = elements, columns = species, entries = atom counts."""
        els = self.elements
        mat = np.zeros((len(els), len(self.species)))
        for j, sp in enumerate(self.species):
            for i, el in enumerate(els):
                mat[i, j] = self.composition[sp].get(el, 0)
        return mat

    def validate(self):
        """Raise MechanismValidation on any structural defect."""
        if self.temperature <= 0:
            raise MechanismValidation("temperature must be positive")
        names = set(self.species)
        for r in self.reactions:
            for side in (r.reactants, r.products):
                for sp, nu in side.items():
                    if sp not in names:
                        raise MechanismValidation(
                            f"unknown species '{sp}' in reaction {r.label()}")
                    if not (isinstance(nu, int) and nu >= 0):
                        raise MechanismValidation(
                            f"stoichiometric coefficient for '{sp}' must be a "
                            f"nonnegative integer in reaction {r.label()}")
            for arr in (r.forward, r.reverse):
                if arr is not None and not arr.A > 0:
                    raise MechanismValidation(
                        f"pre-exponential factor must be positive in "
                        f"reaction {r.label()}")
            for el in self.elements:
                lhs = sum(nu * self.composition[sp].get(el, 0)
                          for sp, nu in r.reactants.items())
                rhs = sum(nu * self.composition[sp].get(el, 0)
                          for sp, nu in r.products.items())
                if lhs != rhs:
                    raise MechanismValidation(
                        f"element '{el}' unbalanced in reaction {r.label()}: "
                        f"{lhs} vs {rhs}")
        return self


def load_mechanism(path) -> Mechanism:
    """Load and validate a mechanism JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"not valid JSON: {exc}") from exc
    return mechanism_from_dict(doc)


def mechanism_from_dict(doc) -> Mechanism:
    for key in ("units", "temperature_K", "species", "reactions"):
        if key not in doc:
            raise SchemaMismatch(f"mechanism file missing key '{key}'")
    species = []
    composition = {}
    for entry in doc["species"]:
        species.append(entry["name"])
        composition[entry["name"]] = {k: int(v)
                                      for k, v in entry["composition"].items()}
    reactions = []
    for r in doc["reactions"]:
        fwd = Arrhenius(**r["forward"])
        rev = Arrhenius(**r["reverse"]) if r.get("reverse") else None
        reactions.append(Reaction(
            reactants={k: int(v) for k, v in r["reactants"].items()},
            products={k: int(v) for k, v in r["products"].items()},
            third_body=bool(r.get("third_body", False)),
            forward=fwd,
            reverse=rev,
        ))
    mech = Mechanism(
        species=species,
        composition=composition,
        reactions=reactions,
        temperature=float(doc["temperature_K"]),
        units=dict(doc["units"]),
    )
    return mech.validate()


def conserved_subspace(mech: Mechanism) -> np.ndarray:
    """Elemental conservation covectors as rows.

    Each row L satisfies L . field(c) = 0 identically under mass action
    (every reaction is atom-balanced). Returns an array of shape
    (rank, n_species); rows span the row space of the composition matrix.
    """
    mat = mech.composition_matrix()
    # Keep a maximal independent subset of element rows for interpretability.
    rank = np.linalg.matrix_rank(mat)
    rows = []
    for i in range(mat.shape[0]):
        cand = rows + [mat[i]]
        if np.linalg.matrix_rank(np.array(cand)) == len(cand):
            rows.append(mat[i])
        if len(rows) == rank:
            break
    return np.array(rows)


def compile_mechanism(mech: Mechanism) -> ModelSpec:
    """Compile a validated mechanism into a mass-action ModelSpec.

    The state is the vector of species concentrations (mol/cm^3). Species
    rate: sum over reactions of (nu'' - nu') * (k_f * prod c^nu' -
    k_b * prod c^nu'') * [M]^third_body, with [M] the total concentration.
    The Jacobian is assembled analytically from the same expressions.
    """
    mech.validate()
    n = len(mech.species)
    index = {sp: j for j, sp in enumerate(mech.species)}
    T = mech.temperature

    # Precompute per-reaction stoichiometry vectors and rate constants.
    compiled = []
    for r in mech.reactions:
        nu_f = np.zeros(n)
        nu_b = np.zeros(n)
        for sp, nu in r.reactants.items():
            nu_f[index[sp]] += nu
        for sp, nu in r.products.items():
            nu_b[index[sp]] += nu
        kf = r.forward.rate_constant(T)
        kb = r.reverse.rate_constant(T) if r.reverse is not None else 0.0
        compiled.append((nu_f, nu_b, nu_b - nu_f, kf, kb, r.third_body))

    def _power_product(c, nu):
        out = 1.0
        for j in range(n):
            if nu[j]:
                out *= c[j] ** nu[j]
        return out

    def _power_product_grad(c, nu):
        """Gradient of prod c^nu, stable at zero concentrations."""
        grad = np.zeros(n)
        for j in range(n):
            if nu[j]:
                rest = 1.0
                for k in range(n):
                    if k == j:
                        if nu[k] > 1:
                            rest *= nu[k] * c[k] ** (nu[k] - 1)
                        else:
                            rest *= nu[k]
                    elif nu[k]:
                        rest *= c[k] ** nu[k]
                grad[j] = rest
        return grad

    def fld(c):
        c = np.asarray(c, dtype=float)
        m_tot = c.sum()
        out = np.zeros(n)
        for nu_f, nu_b, dnu, kf, kb, tb in compiled:
            rate = kf * _power_product(c, nu_f) - kb * _power_product(c, nu_b)
            if tb:
                rate *= m_tot
            out += dnu * rate
        return out

    def jac(c):
        c = np.asarray(c, dtype=float)
        m_tot = c.sum()
        J = np.zeros((n, n))
        for nu_f, nu_b, dnu, kf, kb, tb in compiled:
            core = kf * _power_product(c, nu_f) - kb * _power_product(c, nu_b)
            dcore = kf * _power_product_grad(c, nu_f) \
                - kb * _power_product_grad(c, nu_b)
            if tb:
                drate = m_tot * dcore + core  # d[M]/dc_j = 1 for every j
            else:
                drate = dcore
            J += np.outer(dnu, drate)
        return J

    model = ModelSpec(
        name=f"mechanism(T={T}K)",
        dim=n,
        field_fn=fld,
        jacobian_fn=jac,
        conservation=conserved_subspace(mech),
    )
    return model


def forward_rate_table(mech: Mechanism, temperature=None):
    """List of (reaction label, k_f, k_b or None) at the given temperature."""
    T = mech.temperature if temperature is None else float(temperature)
    rows = []
    for r in mech.reactions:
        kb = r.reverse.rate_constant(T) if r.reverse is not None else None
        rows.append((r.label(), float(r.forward.rate_constant(T)), kb))
    return rows
