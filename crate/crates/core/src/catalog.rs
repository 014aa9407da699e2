//! Reproducible test instances: the star graph, the line family `H_{E,τ}`,
//! searched instances of every threshold kind and random sweeps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::free::FreeModel;
use crate::graph::{pair, GraphWithRays, RayFunction, RayPart, Site};
use crate::linalg::Matrix;
use crate::perturbation::{joining_perturbation, FactoredPerturbation};
use crate::scalar::{rat, RankTol, Rational, Scalar};
use crate::threshold::{classify, ThresholdKind};

/// A graph with an exact factored perturbation.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub graph: GraphWithRays,
    pub perturbation: FactoredPerturbation<Rational>,
}

impl Instance {
    pub fn model(&self) -> FreeModel<Rational> {
        FreeModel::new(&self.graph).expect("catalog graphs have a positive definite h₀")
    }
}

/// `−Δ_G = H₀ + J` on the star with `n` rays.
pub fn star_instance(n: usize) -> Instance {
    let graph = GraphWithRays::star(n);
    let perturbation = joining_perturbation(&graph);
    Instance { name: format!("star N={n}"), graph, perturbation }
}

/// Sites `[0, 1^(1), 1^(2)]` carrying `V_{E,τ}` on the line (star with two rays).
pub fn family_sites() -> Vec<Site> {
    vec![Site::K(0), Site::Ray { ray: 0, pos: 1 }, Site::Ray { ray: 1, pos: 1 }]
}

/// Dense matrix of `V_{E,τ} = (E−2)|s⟩⟨s| + τJ` on [`family_sites`].
pub fn family_matrix<S: Scalar>(e: &S, tau: &S) -> Matrix<S> {
    let t = e.clone() - S::from_i64(2);
    let off = -tau.clone();
    Matrix::from_rows(vec![
        vec![t, off.clone(), off.clone()],
        vec![off.clone(), S::zero(), S::zero()],
        vec![off, S::zero(), S::zero()],
    ])
}

/// Exact factorization of `V_{E,τ}` for `τ ≠ 0`.
///
/// With `f = f₁ + f₂` and `t = E − 2`, the columns `v₁ = a s + f`,
/// `v₂ = c s + f` with `a = −(τ + t/τ)/2`, `c = (τ − t/τ)/2` and
/// `U = diag(1, −1)` give `v U v* = t|s⟩⟨s| − τ(|s⟩⟨f| + |f⟩⟨s|)`.
pub fn family_exact(e: &Rational, tau: &Rational) -> Option<Instance> {
    if Scalar::is_zero(tau) {
        return None;
    }
    let graph = GraphWithRays::star(2);
    let t = e.clone() - rat(2, 1);
    let ratio = t / tau.clone();
    let a = -(tau.clone() + ratio.clone()) / rat(2, 1);
    let c = (tau.clone() - ratio) / rat(2, 1);
    let column = |x: Rational| {
        RayFunction::from_sites(
            &graph,
            &[(Site::K(0), x), (Site::Ray { ray: 0, pos: 1 }, rat(1, 1)), (Site::Ray { ray: 1, pos: 1 }, rat(1, 1))],
        )
    };
    let u = Matrix::from_diagonal(&[rat(1, 1), rat(-1, 1)]);
    let perturbation = FactoredPerturbation::build(&graph, vec![column(a), column(c)], u, RankTol::default()).ok()?;
    Some(Instance { name: format!("line family E={e} tau={tau}"), graph, perturbation })
}

/// Regular instance: the line family at `(E, τ) = (5, 1)`, off the curve `2τ² = E`.
pub fn regular_instance() -> Instance {
    let mut inst = family_exact(&rat(5, 1), &rat(1, 1)).expect("τ ≠ 0");
    inst.name = "regular: line family E=5 tau=1".into();
    inst
}

/// `V = −Σ_i |H₀ψ_i⟩⟨H₀ψ_i| / ⟨ψ_i, H₀ψ_i⟩`, so that `(H₀ + V)ψ_i = 0`.
///
/// Needs `⟨ψ_i, H₀ψ_j⟩ = 0` for `i ≠ j` and every `⟨ψ_i, H₀ψ_i⟩` a positive
/// rational square, so the columns `H₀ψ_i / √⟨ψ_i, H₀ψ_i⟩` are exact and
/// `U = −I`. The resulting `H` is nonnegative: it is `H₀` minus the
/// `H₀`-orthogonal projection onto the span of the `ψ_i`.
pub fn energy_cancellation(model: &FreeModel<Rational>, psis: &[RayFunction<Rational>]) -> Option<FactoredPerturbation<Rational>> {
    let g = model.graph();
    let applied: Vec<RayFunction<Rational>> = psis.iter().map(|p| model.apply_h0(p)).collect();
    let mut columns = Vec::new();
    for (i, (p, h)) in psis.iter().zip(&applied).enumerate() {
        if !h.is_finitely_supported() {
            return None;
        }
        for q in &psis[..i] {
            if !Scalar::is_zero(&pair(q, h).ok()?) {
                return None;
            }
        }
        let energy = pair(p, h).ok()?;
        if !energy.is_positive() {
            return None;
        }
        let root = Scalar::sqrt(&energy)?;
        columns.push(h.scale(&(rat(1, 1) / root)));
    }
    let u = Matrix::identity(columns.len()).scale(&rat(-1, 1));
    FactoredPerturbation::build(g, columns, u, RankTol::default()).ok()
}

/// Function with `k` on `K`, heads `heads[α]` and constant tails `tails[α]`.
fn ray_function(k: Vec<Rational>, heads: Vec<Vec<Rational>>, tails: Vec<Rational>) -> RayFunction<Rational> {
    let rays = heads.into_iter().zip(tails).map(|(h, t)| RayPart::new(h, vec![t])).collect();
    RayFunction::from_parts(k, rays)
}

/// All integer vectors of length `len` with entries in `lo..=hi`, in
/// lexicographic order.
fn integer_vectors(len: usize, lo: i64, hi: i64) -> impl Iterator<Item = Vec<i64>> {
    let base = (hi - lo + 1) as u64;
    let total = base.pow(len as u32);
    (0..total).map(move |mut idx| {
        let mut v = vec![0i64; len];
        for slot in v.iter_mut().rev() {
            *slot = lo + (idx % base) as i64;
            idx /= base;
        }
        v
    })
}

/// First instance on the line (star with two rays) whose classification is
/// `target`, found by enumerating small integer candidates for a bound
/// state (finite support) and, for the third kind, a resonance (constant
/// tails), and feeding them to [`energy_cancellation`].
///
/// Returns `None` for the regular and first kinds, which have dedicated
/// instances.
pub fn synthetic_instance(target: ThresholdKind) -> Option<Instance> {
    let graph = GraphWithRays::star(2);
    let model: FreeModel<Rational> = FreeModel::new(&graph).ok()?;
    let r = |x: i64| rat(x, 1);
    // Bound candidates: values at 0, 1^(1), 2^(1), 1^(2), 2^(2).
    let bound_candidates = integer_vectors(5, -2, 2)
        .filter(|c| c.iter().any(|&x| x != 0))
        .map(|c| {
            ray_function(vec![r(c[0])], vec![vec![r(c[1]), r(c[2])], vec![r(c[3]), r(c[4])]], vec![r(0), r(0)])
        });
    match target {
        ThresholdKind::SecondKind => {
            for b in bound_candidates {
                let Some(v) = energy_cancellation(&model, std::slice::from_ref(&b)) else { continue };
                if classify(&model, &v).ok()? == target {
                    return Some(Instance { name: "second kind: searched bound state".into(), graph, perturbation: v });
                }
            }
            None
        }
        ThresholdKind::ThirdKind => {
            let bounds: Vec<RayFunction<Rational>> = bound_candidates
                .filter(|b| energy_cancellation(&model, std::slice::from_ref(b)).is_some())
                .take(40)
                .collect();
            // Resonance candidates: value at 0, heads of length 1, tails.
            for c in integer_vectors(5, -2, 2) {
                if c[3] == 0 && c[4] == 0 {
                    continue;
                }
                let res = ray_function(vec![r(c[0])], vec![vec![r(c[1])], vec![r(c[2])]], vec![r(c[3]), r(c[4])]);
                for b in &bounds {
                    let Some(v) = energy_cancellation(&model, &[b.clone(), res.clone()]) else { continue };
                    if classify(&model, &v).ok()? == target {
                        return Some(Instance {
                            name: "third kind: searched bound state and resonance".into(),
                            graph,
                            perturbation: v,
                        });
                    }
                }
            }
            None
        }
        ThresholdKind::Regular | ThresholdKind::FirstKind => None,
    }
}

/// One instance per threshold kind: regular, star (first), searched second
/// and third kinds.
pub fn kind_representatives() -> Vec<(ThresholdKind, Instance)> {
    vec![
        (ThresholdKind::Regular, regular_instance()),
        (ThresholdKind::FirstKind, star_instance(2)),
        (ThresholdKind::SecondKind, synthetic_instance(ThresholdKind::SecondKind).expect("second-kind instance exists")),
        (ThresholdKind::ThirdKind, synthetic_instance(ThresholdKind::ThirdKind).expect("third-kind instance exists")),
    ]
}

fn vertex_name(i: usize) -> String {
    ((b'a' + i as u8) as char).to_string()
}

/// Random connected `K` with at most `max_k` vertices and `1..=max_rays` rays.
pub fn random_graph(rng: &mut ChaCha8Rng, max_k: usize, max_rays: usize) -> GraphWithRays {
    let n = rng.gen_range(1..=max_k);
    let names: Vec<String> = (0..n).map(vertex_name).collect();
    let mut edges: Vec<(String, String)> = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.push((names[j].clone(), names[i].clone()));
    }
    for i in 0..n {
        for j in i + 1..n {
            let exists = edges.iter().any(|(a, b)| (a == &names[i] && b == &names[j]) || (a == &names[j] && b == &names[i]));
            if !exists && rng.gen_bool(0.25) {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    let rays = rng.gen_range(1..=max_rays);
    let joints: Vec<String> = (0..rays).map(|_| names.choose(rng).expect("K is nonempty").clone()).collect();
    GraphWithRays::build(&names, &edges, &joints).expect("random graph is valid")
}

/// Random `V = v U v*` with `1..=3` columns of small integers supported on
/// `K` and ray positions `≤ radius`, and `U` a random signature.
pub fn random_factored(rng: &mut ChaCha8Rng, g: &GraphWithRays, radius: usize) -> FactoredPerturbation<Rational> {
    let sites = g.window(radius);
    loop {
        let k = rng.gen_range(1..=3.min(sites.len()));
        let columns: Vec<RayFunction<Rational>> = (0..k)
            .map(|_| {
                let mut values: Vec<(Site, Rational)> = Vec::new();
                for &s in &sites {
                    if rng.gen_bool(0.5) {
                        values.push((s, rat(rng.gen_range(-2..=2), rng.gen_range(1..=2))));
                    }
                }
                RayFunction::from_sites(g, &values)
            })
            .collect();
        let signs: Vec<Rational> = (0..k).map(|_| if rng.gen_bool(0.5) { rat(1, 1) } else { rat(-1, 1) }).collect();
        if let Ok(v) = FactoredPerturbation::build(g, columns, Matrix::from_diagonal(&signs), RankTol::default()) {
            return v;
        }
    }
}

/// Random resonance-type candidate with constant tails, used to plant a
/// resonance through [`energy_cancellation`].
fn random_planted(rng: &mut ChaCha8Rng, model: &FreeModel<Rational>) -> Option<FactoredPerturbation<Rational>> {
    let g = model.graph();
    for _ in 0..200 {
        let k: Vec<Rational> = (0..g.k_len()).map(|_| rat(rng.gen_range(-2..=2), 1)).collect();
        let heads: Vec<Vec<Rational>> =
            (0..g.ray_count()).map(|_| (0..rng.gen_range(0..=2)).map(|_| rat(rng.gen_range(-2..=2), 1)).collect()).collect();
        let tails: Vec<Rational> = (0..g.ray_count()).map(|_| rat(rng.gen_range(-1..=1), 1)).collect();
        if let Some(v) = energy_cancellation(model, &[ray_function(k, heads, tails)]) {
            if v.support_radius() <= 3 {
                return Some(v);
            }
        }
    }
    None
}

/// `count` random instances on connected `K` with at most 5 vertices and
/// at most 3 rays. The sweep cycles through three constructions so that
/// exceptional thresholds occur: the joining operator (free Laplacian), a
/// planted resonance, and a fully random factored `V` (support radius ≤ 3).
pub fn random_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = out.len();
        let graph = random_graph(&mut rng, 5, 3);
        let model: FreeModel<Rational> = FreeModel::new(&graph).expect("Dirichlet h₀ is positive definite");
        let (label, perturbation) = match i % 3 {
            0 => ("joining", joining_perturbation(&graph)),
            1 => match random_planted(&mut rng, &model) {
                Some(v) => ("planted resonance", v),
                None => continue,
            },
            _ => {
                let radius = rng.gen_range(0..=3);
                ("random", random_factored(&mut rng, &graph, radius))
            }
        };
        out.push(Instance { name: format!("random #{i} ({label}) on {graph}"), graph, perturbation });
    }
    out
}

/// Small graphs for the free-Laplacian dimension counts: stars, paths and
/// cycles with rays at one or several joints.
pub fn small_graphs() -> Vec<(String, GraphWithRays)> {
    let b = |v: &[&str], e: &[(&str, &str)], j: &[&str]| GraphWithRays::build(v, e, j).expect("valid graph");
    vec![
        ("star N=1".into(), GraphWithRays::star(1)),
        ("star N=3".into(), GraphWithRays::star(3)),
        ("path a-b, rays at a,a".into(), b(&["a", "b"], &[("a", "b")], &["a", "a"])),
        ("path a-b-c, ray at b".into(), b(&["a", "b", "c"], &[("a", "b"), ("b", "c")], &["b"])),
        ("triangle, rays at a,a,a".into(), b(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")], &["a", "a", "a"])),
        ("path a-b, rays at a,b".into(), b(&["a", "b"], &[("a", "b")], &["a", "b"])),
        ("path a-b-c, rays at a,c".into(), b(&["a", "b", "c"], &[("a", "b"), ("b", "c")], &["a", "c"])),
        ("triangle, rays at a,b,c".into(), b(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")], &["a", "b", "c"])),
        ("square, rays at a,a,c".into(), b(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")], &["a", "a", "c"])),
        ("path a-b-c-d, rays at b,d".into(), b(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "d")], &["b", "d"])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threshold::eigenspaces;

    #[test]
    fn family_exact_matches_dense_matrix() {
        for (e, t) in [(5, 1), (2, 1), (0, 2), (8, 2)] {
            let inst = family_exact(&rat(e, 1), &rat(t, 1)).unwrap();
            let sites = family_sites();
            let dense = Matrix::from_fn(3, 3, |i, j| inst.perturbation.entry(sites[i], sites[j]));
            assert_eq!(dense, family_matrix(&rat(e, 1), &rat(t, 1)));
        }
    }

    #[test]
    fn representatives_have_their_kinds() {
        for (kind, inst) in kind_representatives() {
            let model = inst.model();
            let report = eigenspaces(&model, &inst.perturbation).unwrap();
            assert_eq!(report.kind, kind, "{}", inst.name);
        }
    }

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instances(6, 7);
        let b = random_instances(6, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.graph, y.graph);
            assert_eq!(x.perturbation, y.perturbation);
        }
    }
}
