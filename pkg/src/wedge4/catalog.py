"""Named experiments: a description and a default configuration each."""

ONE_MODE = {"terms": [[[1, 0, 0, 0], 0.5, 0.0]]}

ENTRIES = {
    "cy-one-mode": {
        "text": (
            "Complex Monge-Ampere equation det(I + h(phi)) = e^f on T^4 with\n"
            "f = log(1 + alpha cos 2 pi x1), alpha = 0.5. The problem reduces to the\n"
            "ODE 1 + phi''/4 = e^f, whose solution phi = -(alpha / pi^2) cos 2 pi x1\n"
            "is the oracle. The density is given as a Fourier series (e^f itself)."
        ),
        "config": {
            "problem": "cy",
            "grid": {"dim": 4, "n": 16},
            "family": {"type": "cy", "density": {"terms": ONE_MODE["terms"], "constant": 1.0}},
        },
    },
    "cy-two-mode": {
        "text": (
            "Genuinely two-variable Monge-Ampere problem with\n"
            "f = alpha cos 2 pi x1 cos 2 pi x3 - log kappa, alpha = 0.2; kappa restores\n"
            "the volume condition mean(e^f) = 1 (solver.compatibility = normalize).\n"
            "Serves as the cross-check between the potential and gauge-fixed solvers."
        ),
        "config": {
            "problem": "cy",
            "grid": {"dim": 4, "n": 16},
            "family": {"type": "cy", "f": {"terms": [[[1, 0, 1, 0], 0.1, 0.0], [[1, 0, -1, 0], 0.1, 0.0]]}},
            "solver": {"compatibility": "normalize"},
        },
    },
    "cy-general": {
        "text": (
            "The two-mode Calabi-Yau problem solved in the gauge-fixed form\n"
            "w = C + h.e+ + da with d*a = 0, starting from a perturbed initial guess."
        ),
        "config": {
            "problem": "general",
            "grid": {"dim": 4, "n": 16},
            "family": {"type": "cy", "f": {"terms": [[[1, 0, 1, 0], 0.1, 0.0], [[1, 0, -1, 0], 0.1, 0.0]]},
                       "normalize": True},
            "perturbation": 0.05,
        },
    },
    "rotation-family": {
        "text": (
            "Graph constraint B = R(t 2pi/3) E on T^3 x R. The fibre has negative\n"
            "tangents while H + H^T is positive definite, here while cos(t 2pi/3) > 0,\n"
            "so continuation must report loss of ellipticity at t* = 0.75."
        ),
        "config": {
            "problem": "continue",
            "grid": {"dim": 3, "n": 8},
            "family": {"type": "graph", "flux": "rotation"},
            "continuation": {"t_end": 1.0},
        },
    },
    "graph-coefficient": {
        "text": (
            "Linear graph B = c(x) E with c = 1 + 0.3 cos 2 pi x1 and E = e0 + grad u,\n"
            "e0 = (1, 0, 0). The one-variable reduction c (1 + u') = m has a closed\n"
            "form solution used as oracle."
        ),
        "config": {
            "problem": "graph",
            "grid": {"dim": 3, "n": 32},
            "family": {"type": "graph", "flux": "coefficient",
                       "coefficient": {"terms": [[[1, 0, 0], 0.3, 0.0]], "constant": 1.0}},
        },
    },
    "graph-cubic": {
        "text": (
            "Nonlinear graph B = E + 0.1 s(x) |E|^2 E with s = cos 2 pi x1 cos 2 pi x2,\n"
            "solved as div F(x, e0 + grad u) = 0."
        ),
        "config": {
            "problem": "graph",
            "grid": {"dim": 3, "n": 16},
            "family": {"type": "graph", "flux": "cubic",
                       "s": {"terms": [[[1, 1, 0], 0.5, 0.0], [[1, -1, 0], 0.5, 0.0]]}},
        },
    },
    "moment-problem": {
        "text": (
            "Hyperkaehler moment maps mu_i(w) = f_i for the standard triple theta_i.\n"
            "With F = |f| and sigma = sum f_i theta_i / F the constraint is the\n"
            "Calabi-Yau fibre translated by Theta = sigma / 2F, for the complex\n"
            "structure whose holomorphic forms are orthogonal to sigma."
        ),
        "config": {
            "problem": "translated-cy",
            "grid": {"dim": 4, "n": 24},
            "family": {"type": "moment", "f": [
                {"terms": [[[1, 0, 0, 0], 0.1, 0.0]], "constant": 1.0},
                {"terms": [[[0, 0, 1, 0], 0.1, 0.0]]},
                {"terms": []},
            ]},
        },
    },
    "cy-path": {
        "text": (
            "Continuation of the Calabi-Yau problem along rho_t = e^{t g} / mean(e^{t g}),\n"
            "g = 0.2 cos 2 pi x1 cos 2 pi x3, from t = 0 to 1 and back."
        ),
        "config": {
            "problem": "continue",
            "grid": {"dim": 4, "n": 16},
            "family": {"type": "cy", "f": {"terms": [[[1, 0, 1, 0], 0.1, 0.0], [[1, 0, -1, 0], 0.1, 0.0]]}},
            "continuation": {"dt0": 0.25, "reverse": True},
        },
    },
    "contrast-bump": {
        "text": (
            "Decay table of J(r) = I(r) / r^2 for an exact 2-form concentrated at\n"
            "scale 4/n. Smooth fields give log-slope near 2; this one does not decay."
        ),
        "config": {
            "problem": "diagnose",
            "grid": {"dim": 4, "n": [256, 256, 4, 4]},
            "diagnose": {"source": "bump", "centers": [[0, 0, 0, 0]]},
        },
    },
    "selftest": {
        "text": (
            "Pairing signature, the integral identity for exact forms on random\n"
            "band-limited 1-forms, and adjointness of d and d*."
        ),
        "config": {"problem": "selftest", "grid": {"dim": 4, "n": 8}},
    },
}


def names():
    return sorted(ENTRIES)


def describe(name):
    if name not in ENTRIES:
        raise KeyError(name)
    import json
    entry = ENTRIES[name]
    return f"{name}\n\n{entry['text']}\n\ndefault config:\n{json.dumps(entry['config'], indent=2)}\n"


def default_config(name):
    import copy
    return copy.deepcopy(ENTRIES[name]["config"])
