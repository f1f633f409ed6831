//! Per-example losses and their analytic gradients.
//!
//! Everything here works on plain `f64` slices so the gradients can be
//! checked against finite differences independently of the embedding tables.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(x)`, stable for large `|x|`.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprGrad {
    pub loss: f64,
    pub user: Vec<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

/// `-ln sigmoid(p.q_i - p.q_j) + l2/2 (|p|^2 + |q_i|^2 + |q_j|^2)`.
pub fn bpr(p: &[f64], qi: &[f64], qj: &[f64], l2: f64) -> BprGrad {
    let x = dot(p, qi) - dot(p, qj);
    let loss = neg_log_sigmoid(x) + 0.5 * l2 * (sq_norm(p) + sq_norm(qi) + sq_norm(qj));
    let g = -sigmoid(-x);
    BprGrad {
        loss,
        user: (0..p.len()).map(|k| g * (qi[k] - qj[k]) + l2 * p[k]).collect(),
        pos: (0..p.len()).map(|k| g * p[k] + l2 * qi[k]).collect(),
        neg: (0..p.len()).map(|k| -g * p[k] + l2 * qj[k]).collect(),
    }
}

/// Translation distance `|h + r - t|`.
pub fn transe_distance(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| (h + r - t).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginGrad {
    pub loss: f64,
    pub head: Vec<f64>,
    pub relation: Vec<f64>,
    pub tail: Vec<f64>,
    pub corrupt: Vec<f64>,
}

const NORM_EPS: f64 = 1e-12;

/// `max(0, margin + d(h,r,t) - d(h,r,t')) + l2/2 (|h|^2 + |r|^2 + |t|^2 + |t'|^2)`.
pub fn transe_margin(h: &[f64], r: &[f64], t: &[f64], tc: &[f64], margin: f64, l2: f64) -> MarginGrad {
    let n = h.len();
    let a: Vec<f64> = (0..n).map(|k| h[k] + r[k] - t[k]).collect();
    let b: Vec<f64> = (0..n).map(|k| h[k] + r[k] - tc[k]).collect();
    let (da, db) = (sq_norm(&a).sqrt(), sq_norm(&b).sqrt());
    let hinge = margin + da - db;
    let reg = 0.5 * l2 * (sq_norm(h) + sq_norm(r) + sq_norm(t) + sq_norm(tc));
    let mut g = MarginGrad {
        loss: hinge.max(0.0) + reg,
        head: h.iter().map(|x| l2 * x).collect(),
        relation: r.iter().map(|x| l2 * x).collect(),
        tail: t.iter().map(|x| l2 * x).collect(),
        corrupt: tc.iter().map(|x| l2 * x).collect(),
    };
    if hinge > 0.0 {
        for k in 0..n {
            let ua = a[k] / da.max(NORM_EPS);
            let ub = b[k] / db.max(NORM_EPS);
            g.head[k] += ua - ub;
            g.relation[k] += ua - ub;
            g.tail[k] -= ua;
            g.corrupt[k] += ub;
        }
    }
    g
}

/// One item's sampled neighborhood as seen by the propagation model.
#[derive(Debug, Clone, Copy)]
pub struct Neighborhood<'a> {
    pub own: &'a [f64],
    pub relations: &'a [Vec<f64>],
    pub tails: &'a [Vec<f64>],
}

/// Attention weights `softmax_k(p . r_k)` and the aggregated item vector
/// `own + sum_k pi_k t_k`.
pub fn kgcn_aggregate(p: &[f64], nb: Neighborhood<'_>) -> (Vec<f64>, Vec<f64>) {
    let mut v = nb.own.to_vec();
    if nb.relations.is_empty() {
        return (v, Vec::new());
    }
    let logits: Vec<f64> = nb.relations.iter().map(|r| dot(p, r)).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    let pi: Vec<f64> = exp.iter().map(|e| e / z).collect();
    for (w, t) in pi.iter().zip(nb.tails) {
        for (vk, tk) in v.iter_mut().zip(t) {
            *vk += w * tk;
        }
    }
    (v, pi)
}

pub fn kgcn_score(p: &[f64], nb: Neighborhood<'_>) -> f64 {
    dot(p, &kgcn_aggregate(p, nb).0)
}

/// Gradients of `s = p . v` for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrad {
    pub score: f64,
    pub user: Vec<f64>,
    pub own: Vec<f64>,
    pub relations: Vec<Vec<f64>>,
    pub tails: Vec<Vec<f64>>,
}

pub fn kgcn_score_grad(p: &[f64], nb: Neighborhood<'_>) -> ScoreGrad {
    let (v, pi) = kgcn_aggregate(p, nb);
    let c: Vec<f64> = nb.tails.iter().map(|t| dot(p, t)).collect();
    let c_bar: f64 = pi.iter().zip(&c).map(|(w, c)| w * c).sum();
    let mut user = v.clone();
    for k in 0..pi.len() {
        let coef = pi[k] * (c[k] - c_bar);
        for (u, r) in user.iter_mut().zip(&nb.relations[k]) {
            *u += coef * r;
        }
    }
    ScoreGrad {
        score: dot(p, &v),
        user,
        own: p.to_vec(),
        relations: (0..pi.len())
            .map(|k| p.iter().map(|x| pi[k] * (c[k] - c_bar) * x).collect())
            .collect(),
        tails: pi.iter().map(|w| p.iter().map(|x| w * x).collect()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgcnGrad {
    pub loss: f64,
    pub user: Vec<f64>,
    pub pos: ScoreGrad,
    pub neg: ScoreGrad,
}

/// `-ln sigmoid(s(u,i) - s(u,j)) + l2/2 (|p|^2 + |e_i|^2 + |e_j|^2)`.
///
/// The returned `pos`/`neg` gradients are already multiplied through by the
/// loss derivative (their `score` fields keep the raw scores).
pub fn kgcn_bpr(p: &[f64], pos: Neighborhood<'_>, neg: Neighborhood<'_>, l2: f64) -> KgcnGrad {
    let mut gi = kgcn_score_grad(p, pos);
    let mut gj = kgcn_score_grad(p, neg);
    let x = gi.score - gj.score;
    let loss = neg_log_sigmoid(x) + 0.5 * l2 * (sq_norm(p) + sq_norm(pos.own) + sq_norm(neg.own));
    let d = -sigmoid(-x);
    let user: Vec<f64> = (0..p.len())
        .map(|k| d * (gi.user[k] - gj.user[k]) + l2 * p[k])
        .collect();
    let scale = |g: &mut ScoreGrad, s: f64, own: &[f64]| {
        for (k, x) in g.own.iter_mut().enumerate() {
            *x = s * *x + l2 * own[k];
        }
        for row in g.relations.iter_mut().chain(g.tails.iter_mut()) {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
    };
    scale(&mut gi, d, pos.own);
    scale(&mut gj, -d, neg.own);
    KgcnGrad {
        loss,
        user,
        pos: gi,
        neg: gj,
    }
}
