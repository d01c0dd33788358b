//! The builtin registry shown by `chronoscale list`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub syntax: String,
    pub doc: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub scales: Vec<Entry>,
    pub systems: Vec<Entry>,
    pub forcings: Vec<Entry>,
    pub nonlinearities: Vec<Entry>,
    pub projections: Vec<Entry>,
}

fn entry(name: &str, syntax: &str, doc: &str) -> Entry {
    Entry { name: name.into(), syntax: syntax.into(), doc: doc.into() }
}

pub fn catalog() -> Catalog {
    Catalog {
        scales: vec![
            entry("real", "real", "the half-line [0, inf)"),
            entry("integers", "integers[:h]", "hZ restricted to [0, inf); h defaults to 1"),
            entry("union", "union", "[0, 1] followed by the integers 2, 3, ..."),
            entry("geometric", "geometric:q", "the powers q^k, k >= 0; not syndetic"),
            entry("tower3", "tower3[:n]", "the points 3^(3^k), k <= n; not syndetic, ends where f64 overflows"),
            entry(
                "random-syndetic",
                "random-syndetic:seed,mu_max",
                "seeded periodic mix of intervals and points with gaps at most mu_max",
            ),
            entry(
                "descriptor",
                r#"{"segments": [[a, b], ...], "pattern": {"kind": "periodic", "period": p}}"#,
                "explicit segments with an optional periodic or sequence continuation",
            ),
        ],
        systems: vec![
            entry("constant", r#"{"A": [[...]]}"#, "constant square matrix"),
            entry("diagonal", r#"{"diag": [...]}"#, "constant diagonal matrix"),
            entry(
                "regular",
                r#"{"regular": {"B": [...], "rotation": theta}}"#,
                "A = (L^sigma Bhat + L^Delta) L^-1 with L a rotation by theta sin t (identity when theta = 0)",
            ),
        ],
        forcings: vec![
            entry("constant", r#"{"constant": [...]}"#, "f(t) = v"),
            entry("sine", r#"{"sine": {"amplitude": [...], "omega": w}}"#, "f(t) = a sin(w t)"),
            entry("exp", r#"{"exp": {"amplitude": [...], "rate": r}}"#, "f(t) = a e^(-r t)"),
            entry("sum", "[term, term, ...]", "sum of forcing terms"),
        ],
        nonlinearities: vec![
            entry("constant", r#"{"constant": [...]}"#, "g = v; h = |v|, c = 0"),
            entry("linear", r#"{"linear": [[...]]}"#, "g = M x; h = 0, c = |M|"),
            entry("sine", r#"{"sine": {"scale": c, "offset": [...]}}"#, "g_k = c sin(x_k) + o_k; h = |o|, c = |c|"),
            entry("square", r#"{"square": {"scale": c}}"#, "g_k = c x_k^2; needs a ball radius r, c = 2|c|r"),
            entry("forcing", r#"{"forcing": <forcing>}"#, "g = f(t); h = sup |f|, c = 0"),
            entry(
                "model",
                r#"{"components": [...], "ball": r}"#,
                "components with an optional ball the iterates must stay in",
            ),
            entry(
                "decay",
                r#"{"B": [...], "alpha": a, "beta": b, "gamma": g, "c1": c1, "c2": c2, "h": h}"#,
                "|a(t, x)| <= c1 |x|^(1+alpha) + c2 e^(-beta t) |x| + h e^(-gamma t), spread evenly over components",
            ),
        ],
        projections: vec![
            entry("spectral", r#""spectral""#, "splitting of a constant A by the growth of e_lambda"),
            entry("identity", r#""identity""#, "P = E"),
            entry("zero", r#""zero""#, "P = 0"),
            entry("matrix", "[[...]]", "constant idempotent matrix"),
        ],
    }
}
