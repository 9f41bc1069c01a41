#![allow(dead_code)]

use limcom::model::{Med, Outcome, ScreeningModel};
use rand::Rng;

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Random full-support prior with entries at least `floor`.
pub fn prior(r: &mut impl Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| floor + (1.0 - n as f64 * floor) * x / s).collect()
}

fn shape(r: &mut impl Rng, nq: usize, max_y: usize) -> Vec<Vec<String>> {
    (0..nq)
        .map(|q| {
            let k = r.gen_range(1..=max_y);
            (0..k).map(|y| format!("y{q}_{y}")).collect()
        })
        .collect()
}

fn table(r: &mut impl Rng, n: usize, actions: &[Vec<String>], lo: f64, hi: f64) -> Vec<Vec<Vec<f64>>> {
    (0..n)
        .map(|_| actions.iter().map(|ys| ys.iter().map(|_| r.gen_range(lo..hi)).collect()).collect())
        .collect()
}

/// Random model whose agent utility has a MED decomposition with the outside
/// option at outcome (0, 0) minimizing `g1`.
pub fn med_model(r: &mut impl Rng, n: usize, nq: usize, max_y: usize) -> ScreeningModel<f64> {
    let actions = shape(r, nq, max_y);
    let mut f: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..1.0)).collect();
    for i in 1..n {
        f[i] += f[i - 1];
    }
    let mut g1: Vec<Vec<f64>> = actions.iter().map(|ys| ys.iter().map(|_| r.gen_range(0.0..2.0)).collect()).collect();
    g1[0][0] = -0.5;
    let g2: Vec<Vec<f64>> = actions.iter().map(|ys| ys.iter().map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let c: Vec<f64> = f.iter().map(|fi| -g1[0][0] * fi - g2[0][0]).collect();
    let principal = table(r, n, &actions, -1.0, 2.0);
    ScreeningModel {
        types: f.clone(),
        prior: prior(r, n, 0.05),
        allocations: (0..nq).map(|q| format!("q{q}")).collect(),
        actions,
        agent: Vec::new(),
        principal,
        outside: Outcome { q: 0, y: 0 },
        transfers: true,
        med: None,
    }
    .with_med_utilities(Med { g1, g2, f, c })
}

/// Random model with unrestricted agent utility and a zero outside option at (0, 0).
pub fn generic_model(r: &mut impl Rng, n: usize, nq: usize, max_y: usize) -> ScreeningModel<f64> {
    let actions = shape(r, nq, max_y);
    let mut agent = table(r, n, &actions, -1.0, 3.0);
    for row in agent.iter_mut() {
        row[0][0] = 0.0;
    }
    let principal = table(r, n, &actions, -1.0, 2.0);
    ScreeningModel {
        types: (1..=n).map(|i| i as f64).collect(),
        prior: prior(r, n, 0.05),
        allocations: (0..nq).map(|q| format!("q{q}")).collect(),
        actions,
        agent,
        principal,
        outside: Outcome { q: 0, y: 0 },
        transfers: true,
        med: None,
    }
}

/// A menu instance whose beliefs form a chain of supports, each type in at
/// most three consecutive beliefs with a degenerate middle one, and `g1`
/// strictly increasing along the chain. Each allocation has one action;
/// allocation 0 is the outside option.
pub struct MenuDraw {
    pub model: ScreeningModel<f64>,
    pub device: Vec<Vec<f64>>,
    pub outcomes: Vec<Outcome>,
    pub supports: Vec<Vec<usize>>,
}

pub fn chain_supports(r: &mut impl Rng, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0];
    for i in 1..n {
        match r.gen_range(0..4) {
            0 => cur.push(i),
            1 => {
                out.push(std::mem::replace(&mut cur, vec![i]));
            }
            2 => {
                let last = *cur.last().unwrap();
                out.push(std::mem::replace(&mut cur, vec![last, i]));
            }
            _ => {
                let last = *cur.last().unwrap();
                let prev = std::mem::replace(&mut cur, vec![last, i]);
                if prev != vec![last] {
                    out.push(prev);
                }
                out.push(vec![last]);
            }
        }
    }
    out.push(cur);
    out
}

/// Model with `h` non-outside allocations, `g1` increasing in the index.
pub fn menu_model(r: &mut impl Rng, n: usize, h: usize) -> ScreeningModel<f64> {
    let mut f = vec![r.gen_range(0.0..1.0)];
    for i in 1..n {
        let next = f[i - 1] + r.gen_range(0.5..1.5);
        f.push(next);
    }
    let mut g1 = vec![vec![-1.0]];
    let mut g = 0.0;
    for _ in 0..h {
        g += r.gen_range(0.2..1.0);
        g1.push(vec![g]);
    }
    let g2: Vec<Vec<f64>> = (0..=h).map(|_| vec![r.gen_range(-1.0..1.0)]).collect();
    let c: Vec<f64> = f.iter().map(|fi| -g1[0][0] * fi - g2[0][0]).collect();
    let actions: Vec<Vec<String>> = (0..=h).map(|_| vec!["y".to_string()]).collect();
    let principal = table(r, n, &actions, -1.0, 2.0);
    ScreeningModel {
        types: f.clone(),
        prior: prior(r, n, 0.1),
        allocations: (0..=h).map(|q| format!("q{q}")).collect(),
        actions,
        agent: Vec::new(),
        principal,
        outside: Outcome { q: 0, y: 0 },
        transfers: true,
        med: None,
    }
    .with_med_utilities(limcom::model::Med { g1, g2, f, c })
}

fn device_for(r: &mut impl Rng, n: usize, supports: &[Vec<usize>]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let raw: Vec<f64> = supports
                .iter()
                .map(|s| if s.contains(&i) { r.gen_range(0.2..1.0) } else { 0.0 })
                .collect();
            let t: f64 = raw.iter().sum();
            raw.iter().map(|x| x / t).collect()
        })
        .collect()
}

pub fn implementable_menu(r: &mut impl Rng, max_beliefs: usize) -> MenuDraw {
    loop {
        let n = r.gen_range(2..=3);
        let supports = chain_supports(r, n);
        if supports.len() > max_beliefs {
            continue;
        }
        let h = supports.len();
        let model = menu_model(r, n, h);
        let device = device_for(r, n, &supports);
        let outcomes = (1..=h).map(|q| Outcome { q, y: 0 }).collect();
        return MenuDraw { model, device, outcomes, supports };
    }
}

/// Chain instance with the outcomes of the first and last belief swapped,
/// so a higher type's belief carries a lower `g1`.
pub fn dic_m_failure(r: &mut impl Rng) -> MenuDraw {
    loop {
        let mut d = implementable_menu(r, 4);
        if d.supports.len() < 2 {
            continue;
        }
        let last = d.outcomes.len() - 1;
        d.outcomes.swap(0, last);
        return d;
    }
}

/// Two types spread over three beliefs that all contain both types.
pub fn overlapping_failure(r: &mut impl Rng) -> MenuDraw {
    let supports = vec![vec![0, 1]; 3];
    let model = menu_model(r, 2, 3);
    let device = device_for(r, 2, &supports);
    let outcomes = (1..=3).map(|q| Outcome { q, y: 0 }).collect();
    MenuDraw { model, device, outcomes, supports }
}

/// Pairwise DIC-P bounds `t_h - t_k <= c[h][k]` from types assigned to `h`.
pub fn dic_p_bounds(model: &ScreeningModel<f64>, device: &[Vec<f64>], outcomes: &[Outcome]) -> Vec<Vec<f64>> {
    let h = outcomes.len();
    let mut c = vec![vec![f64::INFINITY; h]; h];
    for i in 0..model.num_types() {
        for a in 0..h {
            if device[i][a] <= 0.0 {
                continue;
            }
            for b in 0..h {
                let d = model.u(i, outcomes[a]) - model.u(i, outcomes[b]);
                c[a][b] = c[a][b].min(d);
            }
        }
    }
    c
}

/// Depth-first search over transfers on a grid of spacing `step` inside
/// `[-bound, bound]`, with `t_0 = 0`, accepting violations up to `tol`.
pub fn grid_transfers(c: &[Vec<f64>], step: f64, bound: f64, tol: f64) -> Option<Vec<f64>> {
    fn go(c: &[Vec<f64>], t: &mut Vec<f64>, step: f64, bound: f64, tol: f64) -> bool {
        let k = t.len();
        if k == c.len() {
            return true;
        }
        let mut lo = -bound;
        let mut hi = bound;
        for (j, tj) in t.iter().enumerate() {
            // t_k - t_j <= c[k][j] and t_j - t_k <= c[j][k]
            hi = hi.min(tj + c[k][j] + tol);
            lo = lo.max(tj - c[j][k] - tol);
        }
        if lo > hi {
            return false;
        }
        let mut g = (lo / step).ceil() as i64;
        let top = (hi / step).floor() as i64;
        while g <= top {
            t.push(g as f64 * step);
            if go(c, t, step, bound, tol) {
                return true;
            }
            t.pop();
            g += 1;
        }
        false
    }
    let mut t = vec![0.0];
    if go(c, &mut t, step, bound, tol) {
        Some(t)
    } else {
        None
    }
}

/// Whether the difference system stays infeasible after loosening every
/// bound by `slack` (Bellman-Ford negative cycle test).
pub fn robustly_infeasible(c: &[Vec<f64>], slack: f64) -> bool {
    let h = c.len();
    let mut d = vec![0.0; h];
    for _ in 0..h {
        for a in 0..h {
            for b in 0..h {
                // edge b -> a with weight c[a][b]: t_a <= t_b + c[a][b]
                if a != b && d[b] + c[a][b] + slack < d[a] {
                    d[a] = d[b] + c[a][b] + slack;
                }
            }
        }
    }
    (0..h).any(|a| (0..h).any(|b| a != b && d[b] + c[a][b] + slack < d[a] - 1e-12))
}

fn simplex(r: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Random mechanism in which every type plays a best response. Duplicated
/// inputs create ties the strategies mix over, split outputs create pairs of
/// outputs with equal posteriors, and some types are indifferent about
/// participating and randomize. The last allocation is the outside option
/// and is never used inside the mechanism.
pub fn random_mechanism(r: &mut impl Rng) -> limcom::canonical::GeneralMechanism<f64> {
    let n = r.gen_range(2..=4);
    let nm = r.gen_range(n..=5);
    let na = r.gen_range(2..=4);
    let ny: Vec<usize> = (0..na).map(|_| r.gen_range(1..=2)).collect();
    let mut prior = simplex(r, n);
    if r.gen_bool(0.3) {
        let v = r.gen_range(0..n);
        prior[v] = 0.0;
        let s: f64 = prior.iter().sum();
        prior.iter_mut().for_each(|p| *p /= s);
    }
    let ns = r.gen_range(1..=5);
    let mut device: Vec<Vec<f64>> = (0..nm).map(|_| simplex(r, ns)).collect();
    if nm > 1 && r.gen_bool(0.5) {
        let a = r.gen_range(0..nm);
        let b = (a + 1 + r.gen_range(0..nm - 1)) % nm;
        device[b] = device[a].clone();
    }
    let mut allocation: Vec<Vec<f64>> = (0..ns)
        .map(|_| {
            let mut a = simplex(r, na - 1);
            a.push(0.0);
            a
        })
        .collect();
    let mut expost: Vec<Vec<Vec<f64>>> = (0..ns).map(|_| ny.iter().map(|&k| simplex(r, k)).collect()).collect();
    if r.gen_bool(0.6) {
        let s = r.gen_range(0..ns);
        let lam = r.gen_range(0.2..0.8);
        for row in device.iter_mut() {
            let x = row[s];
            row[s] = lam * x;
            row.push((1.0 - lam) * x);
        }
        let mut a = simplex(r, na - 1);
        a.push(0.0);
        allocation.push(a);
        expost.push(ny.iter().map(|&k| simplex(r, k)).collect());
    }
    let tab = |r: &mut dyn rand::RngCore| -> Vec<Vec<Vec<f64>>> {
        (0..n)
            .map(|_| ny.iter().map(|&k| (0..k).map(|_| r.gen_range(-2.0..2.0)).collect()).collect())
            .collect()
    };
    let agent = tab(r);
    let principal = tab(r);
    let mut mech = limcom::canonical::GeneralMechanism {
        prior,
        device,
        allocation,
        expost,
        strategies: vec![vec![0.0; nm]; n],
        participation: vec![1.0; n],
        agent,
        principal,
        outside: Outcome { q: na - 1, y: 0 },
    };
    for v in 0..n {
        let pay: Vec<f64> = (0..nm).map(|m| mech.report_payoff(v, m)).collect();
        let best = pay.iter().cloned().fold(f64::MIN, f64::max);
        let ties: Vec<usize> = (0..nm).filter(|&m| pay[m] >= best - 1e-12).collect();
        let w = simplex(r, ties.len());
        for (k, &m) in ties.iter().enumerate() {
            mech.strategies[v][m] = w[k];
        }
        match r.gen_range(0..3) {
            0 => {
                mech.agent[v][na - 1][0] = best;
                mech.participation[v] = r.gen_range(0.1..0.9);
            }
            1 => {
                mech.agent[v][na - 1][0] = best + 0.5;
                mech.participation[v] = 0.0;
            }
            _ => mech.agent[v][na - 1][0] = best - r.gen_range(0.1..1.0),
        }
    }
    mech
}
