use attn_topo::distance::{distance_matrix, matching, wasserstein, wasserstein_with, GroundMetric};
use attn_topo::homology::PersistenceDiagram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_diagram(rng: &mut impl Rng, max_points: usize) -> PersistenceDiagram {
    let k = rng.gen_range(0..=max_points);
    let points = (0..k)
        .map(|_| {
            let b: f64 = rng.gen_range(0.0..1.0);
            (b, rng.gen_range(b..=1.0))
        })
        .collect();
    PersistenceDiagram::new(1, points)
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Minimum over every partial injection D1 → D2; unmatched points go to the diagonal.
fn brute_force(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64, metric: GroundMetric) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn search(
        i: usize,
        d1: &[(f64, f64)],
        d2: &[(f64, f64)],
        used: &mut Vec<bool>,
        terms: &mut Vec<f64>,
        p: f64,
        metric: GroundMetric,
        best: &mut f64,
    ) {
        if i == d1.len() {
            let mut all = terms.clone();
            for (j, &b) in d2.iter().enumerate() {
                if !used[j] {
                    all.push(metric.to_diagonal(b).powf(p));
                }
            }
            *best = best.min(sorted_sum(all));
            return;
        }
        terms.push(metric.to_diagonal(d1[i]).powf(p));
        search(i + 1, d1, d2, used, terms, p, metric, best);
        terms.pop();
        for j in 0..d2.len() {
            if !used[j] {
                used[j] = true;
                terms.push(metric.dist(d1[i], d2[j]).powf(p));
                search(i + 1, d1, d2, used, terms, p, metric, best);
                terms.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(0, &d1.points, &d2.points, &mut vec![false; d2.len()], &mut Vec::new(), p, metric, &mut best);
    best.powf(1.0 / p)
}

#[test]
fn agrees_with_exhaustive_matching() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let d1 = random_diagram(&mut rng, 4);
        let d2 = random_diagram(&mut rng, 4);
        for p in [1.0, 2.0, 3.0] {
            for metric in [GroundMetric::Euclidean, GroundMetric::LInfinity] {
                let fast = wasserstein_with(&d1, &d2, p, metric).unwrap();
                let slow = brute_force(&d1, &d2, p, metric);
                assert_eq!(fast, slow, "{d1:?} {d2:?} p={p} {metric:?}");
            }
        }
    }
}

#[test]
fn symmetric_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let a = random_diagram(&mut rng, 8);
        let b = random_diagram(&mut rng, 8);
        for p in [1.0, 2.0] {
            assert_eq!(wasserstein(&a, &b, p).unwrap(), wasserstein(&b, &a, p).unwrap());
        }
    }
}

#[test]
fn triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let (a, b, c) = (random_diagram(&mut rng, 6), random_diagram(&mut rng, 6), random_diagram(&mut rng, 6));
        for p in [1.0, 2.0] {
            let ab = wasserstein(&a, &b, p).unwrap();
            let bc = wasserstein(&b, &c, p).unwrap();
            let ac = wasserstein(&a, &c, p).unwrap();
            assert!(ac <= ab + bc + 1e-9, "{ac} > {ab} + {bc}");
        }
    }
}

#[test]
fn identity_of_indiscernibles() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let a = random_diagram(&mut rng, 6);
        let mut shuffled = a.clone();
        shuffled.points.reverse();
        assert_eq!(wasserstein(&a, &shuffled, 2.0).unwrap(), 0.0);
        let mut moved = a.clone();
        if let Some(p) = moved.points.first_mut() {
            p.1 += 0.5;
            assert!(wasserstein(&a, &moved, 1.0).unwrap() > 0.0);
        }
    }
}

#[test]
fn single_point_against_empty() {
    let a = PersistenceDiagram::new(1, vec![(0.0, 1.0)]);
    let w = wasserstein(&a, &PersistenceDiagram::empty(1), 1.0).unwrap();
    assert!((w - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn matching_is_a_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let a = random_diagram(&mut rng, 5);
        let b = random_diagram(&mut rng, 5);
        let m = matching(&a, &b, 2.0, GroundMetric::Euclidean).unwrap();
        let mut seen = m.assignment.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..a.len() + b.len()).collect::<Vec<_>>());
    }
}

#[test]
fn matrix_is_symmetric_with_zero_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let diagrams: Vec<_> = (0..6).map(|_| random_diagram(&mut rng, 5)).collect();
    let m = distance_matrix(&diagrams, 1.0, GroundMetric::Euclidean).unwrap();
    for i in 0..6 {
        assert_eq!(m[i][i], 0.0);
        for j in 0..6 {
            assert_eq!(m[i][j], m[j][i]);
            if i != j {
                assert_eq!(m[i][j], wasserstein(&diagrams[i], &diagrams[j], 1.0).unwrap());
            }
        }
    }
}
