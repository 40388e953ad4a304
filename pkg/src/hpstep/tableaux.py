"""IMEX Butcher pairs: an ESDIRK implicit half and an ERK explicit half
sharing abscissae ``c`` and weights ``b``.

The additive pairs are the 4th-order six-stage and 5th-order eight-stage
L-stable, stiffly accurate schemes of Kennedy & Carpenter; coefficients are
embedded as the published exact rationals and accepted through programmatic
order-condition checks at load time, not transcription trust.  ``BE`` is
backward Euler as a single fully implicit stage (no explicit half).
"""

import numpy as np

from .errors import UnknownTableauError

ORDER_TOL = 1e-12


class ButcherPair:
    """Paired implicit (A, b) and explicit (Ahat, bhat) tableaux.

    ``Ahat`` is ``None`` for purely implicit methods.  ``b_emb`` holds the
    embedded lower-order weights when the scheme publishes them.
    """

    def __init__(self, name, A, b, c, gamma, order, Ahat=None, bhat=None,
                 embedded_order=None, b_emb=None):
        self.name = name
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.gamma = float(gamma)
        self.order = order
        self.Ahat = None if Ahat is None else np.asarray(Ahat, dtype=float)
        self.bhat = None if bhat is None else np.asarray(bhat, dtype=float)
        self.embedded_order = embedded_order
        self.b_emb = None if b_emb is None else np.asarray(b_emb, dtype=float)
        self.s = self.b.size
        self.validate()

    @property
    def is_imex(self):
        return self.Ahat is not None

    def validate(self):
        """Enforce the structural and order-condition invariants."""
        s, A, b, c = self.s, self.A, self.b, self.c
        if A.shape != (s, s) or c.size != s:
            raise ValueError(f"{self.name}: inconsistent tableau shapes")
        if s > 1:
            if A[0, 0] != 0.0:
                raise ValueError(f"{self.name}: first stage must be explicit")
            diag = np.diag(A)[1:]
            if not np.allclose(diag, self.gamma, rtol=0, atol=ORDER_TOL):
                raise ValueError(f"{self.name}: diagonal must equal gamma")
        if np.any(np.abs(np.triu(A, 1)) > 0):
            raise ValueError(f"{self.name}: implicit table must be lower triangular")
        _check(f"{self.name}: row sums of A must equal c",
               np.abs(A.sum(axis=1) - c).max())
        for cond, target, label in _order_conditions(A, b, c, self.order):
            _check(f"{self.name}: implicit order condition {label}",
                   abs(cond - target))
        if self.Ahat is not None:
            Ah, bh = self.Ahat, self.bhat
            if np.any(np.abs(np.triu(Ah, 0)) > 0):
                raise ValueError(
                    f"{self.name}: explicit table must be strictly lower triangular")
            _check(f"{self.name}: row sums of Ahat must equal c",
                   np.abs(Ah.sum(axis=1) - c).max())
            for cond, target, label in _order_conditions(Ah, bh, c, self.order):
                _check(f"{self.name}: explicit order condition {label}",
                       abs(cond - target))
        if self.b_emb is not None:
            for cond, target, label in _order_conditions(
                    A, self.b_emb, c, self.embedded_order):
                _check(f"{self.name}: embedded order condition {label}",
                       abs(cond - target))

    def stability_function(self, z):
        """Amplification factor of the implicit half applied to u' = z/dt*u."""
        z = complex(z)
        u = np.zeros(self.s, dtype=complex)
        for i in range(self.s):
            acc = 1.0 + z * (self.A[i, :i] @ u[:i])
            den = 1.0 - z * self.A[i, i]
            if den == 0:
                raise ZeroDivisionError(
                    f"{self.name}: stability function singular at z={z}")
            u[i] = acc / den
        return 1.0 + z * (self.b @ u)


def _check(label, err):
    if not err <= ORDER_TOL:
        raise ValueError(f"{label} violated by {err:.3e}")


def _order_conditions(A, b, c, order):
    """Classical rooted-tree order conditions through order 5."""
    conds = [(b.sum(), 1.0, "sum(b)=1")]
    if order >= 2:
        conds.append((b @ c, 1 / 2, "b.c=1/2"))
    if order >= 3:
        conds += [(b @ c**2, 1 / 3, "b.c^2=1/3"),
                  (b @ (A @ c), 1 / 6, "b.Ac=1/6")]
    if order >= 4:
        conds += [(b @ c**3, 1 / 4, "b.c^3=1/4"),
                  ((b * c) @ (A @ c), 1 / 8, "(b*c).Ac=1/8"),
                  (b @ (A @ c**2), 1 / 12, "b.Ac^2=1/12"),
                  (b @ (A @ (A @ c)), 1 / 24, "b.AAc=1/24")]
    if order >= 5:
        Ac = A @ c
        conds += [(b @ c**4, 1 / 5, "b.c^4=1/5"),
                  ((b * c**2) @ Ac, 1 / 10, "(b*c^2).Ac=1/10"),
                  (b @ Ac**2, 1 / 20, "b.(Ac)^2=1/20"),
                  ((b * c) @ (A @ c**2), 1 / 15, "(b*c).Ac^2=1/15"),
                  (b @ (A @ c**3), 1 / 20, "b.Ac^3=1/20"),
                  ((b * c) @ (A @ Ac), 1 / 30, "(b*c).AAc=1/30"),
                  (b @ (A @ (c * Ac)), 1 / 40, "b.A(c*Ac)=1/40"),
                  (b @ (A @ (A @ c**2)), 1 / 60, "b.AAc^2=1/60"),
                  (b @ (A @ (A @ Ac)), 1 / 120, "b.AAAc=1/120")]
    if order >= 6:
        raise ValueError("order conditions implemented through order 5 only")
    return conds


def _ark4():
    g = 1 / 4
    c = [0, 1 / 2, 83 / 250, 31 / 50, 17 / 20, 1]
    A = [
        [0, 0, 0, 0, 0, 0],
        [1 / 4, g, 0, 0, 0, 0],
        [8611 / 62500, -1743 / 31250, g, 0, 0, 0],
        [5012029 / 34652500, -654441 / 2922500, 174375 / 388108, g, 0, 0],
        [15267082809 / 155376265600, -71443401 / 120774400,
         730878875 / 902184768, 2285395 / 8070912, g, 0],
        [82889 / 524892, 0, 15625 / 83664, 69875 / 102672, -2260 / 8211, g],
    ]
    Ahat = [
        [0, 0, 0, 0, 0, 0],
        [1 / 2, 0, 0, 0, 0, 0],
        [13861 / 62500, 6889 / 62500, 0, 0, 0, 0],
        [-116923316275 / 2393684061468, -2731218467317 / 15368042101831,
         9408046702089 / 11113171139209, 0, 0, 0],
        [-451086348788 / 2902428689909, -2682348792572 / 7519795681897,
         12662868775082 / 11960479115383, 3355817975965 / 11060851509271, 0, 0],
        [647845179188 / 3216320057751, 73281519250 / 8382639484533,
         552539513391 / 3454668386233, 3354512671639 / 8306763924573,
         4040 / 17871, 0],
    ]
    b = [82889 / 524892, 0, 15625 / 83664, 69875 / 102672, -2260 / 8211, g]
    b_emb = [4586570599 / 29645900160, 0, 178811875 / 945068544,
             814220225 / 1159782912, -3700637 / 11593932, 61727 / 225920]
    return ButcherPair("ARK4(3)6L[2]SA", A, b, c, g, order=4, Ahat=Ahat,
                       bhat=b, embedded_order=3, b_emb=b_emb)


def _ark5():
    g = 41 / 200
    c = [0, 41 / 100, 2935347310677 / 11292855782101,
         1426016391358 / 7196633302097, 92 / 100, 24 / 100, 3 / 5, 1]
    A = [
        [0, 0, 0, 0, 0, 0, 0, 0],
        [41 / 200, g, 0, 0, 0, 0, 0, 0],
        [41 / 400, -567603406766 / 11931857230679, g, 0, 0, 0, 0, 0],
        [683785636431 / 9252920307686, 0, -110385047103 / 1367015193373, g,
         0, 0, 0, 0],
        [3016520224154 / 10081342136671, 0, 30586259806659 / 12414158314087,
         -22760509404356 / 11113319521817, g, 0, 0, 0],
        [218866479029 / 1489978393911, 0, 638256894668 / 5436446318841,
         -1179710474555 / 5321154724896, -60928119172 / 8023461067671, g,
         0, 0],
        [1020004230633 / 5715676835656, 0, 25762820946817 / 25263940353407,
         -2161375909145 / 9755907335909, -211217309593 / 5846859502534,
         -4269925059573 / 7827059040749, g, 0],
        [-872700587467 / 9133579230613, 0, 0, 22348218063261 / 9555858737531,
         -1143369518992 / 8141816002931, -39379526789629 / 19018526304540,
         32727382324388 / 42900044865799, g],
    ]
    Ahat = [
        [0, 0, 0, 0, 0, 0, 0, 0],
        [41 / 100, 0, 0, 0, 0, 0, 0, 0],
        [367902744464 / 2072280473677, 677623207551 / 8224143866563, 0, 0,
         0, 0, 0, 0],
        [1268023523408 / 10340822734521, 0, 1029933939417 / 13636558850479,
         0, 0, 0, 0, 0],
        [14463281900351 / 6315353703477, 0, 66114435211212 / 5879490589093,
         -54053170152839 / 4284798021562, 0, 0, 0, 0],
        [14090043504691 / 34967701212078, 0, 15191511035443 / 11219624916014,
         -18461159152457 / 12425892160975, -281667163811 / 9011619295870, 0,
         0, 0],
        [19230459214898 / 13134317526959, 0, 21275331358303 / 2942455364971,
         -38145345988419 / 4862620318723, -1 / 8, -1 / 8, 0, 0],
        [-19977161125411 / 11928030595625, 0, -40795976796054 / 6384907823539,
         177454434618887 / 12078138498510, 782672205425 / 8267701900261,
         -69563011059811 / 9646580694205, 7356628210526 / 4942186776405, 0],
    ]
    b = [-872700587467 / 9133579230613, 0, 0, 22348218063261 / 9555858737531,
         -1143369518992 / 8141816002931, -39379526789629 / 19018526304540,
         32727382324388 / 42900044865799, g]
    b_emb = [-975461918565 / 9796059967033, 0, 0,
             78070527104295 / 32432590147079, -548382580838 / 3424219808633,
             -33438840321285 / 15594753105479, 3629800801594 / 4656183773603,
             4035322873751 / 18575991585200]
    return ButcherPair("ARK5(4)8L[2]SA", A, b, c, g, order=5, Ahat=Ahat,
                       bhat=b, embedded_order=4, b_emb=b_emb)


def _backward_euler():
    return ButcherPair("BE", A=[[1.0]], b=[1.0], c=[1.0], gamma=1.0, order=1)


_REGISTRY = {
    "BE": _backward_euler,
    "ARK4(3)6L[2]SA": _ark4,
    "ARK5(4)8L[2]SA": _ark5,
}
_ALIASES = {"ARK4": "ARK4(3)6L[2]SA", "ARK5": "ARK5(4)8L[2]SA"}


def available_tableaux():
    return sorted(_REGISTRY)


def load_tableau(name):
    """Load and validate a Butcher pair by name."""
    key = _ALIASES.get(name, name)
    if key not in _REGISTRY:
        raise UnknownTableauError(
            f"unknown tableau {name!r}; available: "
            f"{', '.join(available_tableaux())}")
    return _REGISTRY[key]()
