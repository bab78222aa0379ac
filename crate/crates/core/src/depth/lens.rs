use crate::error::{Error, Result};
use crate::fermat::FermatGraph;

/// How a query that is not an inner point is connected to the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LensMode {
    /// Pays `|x - q|^alpha` for the first hop; depth vanishes far from the data.
    Modified,
    /// Snaps the query to its nearest inner point.
    Unmodified,
}

/// Number of inner pairs `(i < j)` whose lens contains the query, and the pair total.
pub fn lens_count(g: &FermatGraph, x: &[f64], mode: LensMode) -> Result<(u64, u64)> {
    let m = g.len();
    if m < 2 {
        return Err(Error::usage("lens depth needs at least 2 inner points"));
    }
    let dx = match mode {
        LensMode::Modified => g.modified_to_all(x)?,
        LensMode::Unmodified => g.unmodified_to_all(x)?,
    };
    Ok((count_pairs(g, &dx), (m * (m - 1) / 2) as u64))
}

/// Closed-ball membership: pair `(i, j)` counts when `max(dx[i], dx[j]) <= D(i, j)`.
pub(crate) fn count_pairs(g: &FermatGraph, dx: &[f64]) -> u64 {
    let pw = g.pairwise();
    let row_max = g.lower_row_max();
    let mut count = 0u64;
    for i in 1..dx.len() {
        let di = dx[i];
        if di > row_max[i] {
            continue;
        }
        let row = pw.lower_row(i);
        for (&r, &dj) in row.iter().zip(&dx[..i]) {
            count += (di.max(dj) <= r) as u64;
        }
    }
    count
}

/// Empirical lens depth of `x` with respect to the inner points of `g`.
pub fn lens_depth(g: &FermatGraph, x: &[f64], mode: LensMode) -> Result<f64> {
    let (hits, pairs) = lens_count(g, x, mode)?;
    Ok(hits as f64 / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermat::{build_fermat_graph, hop_cost};
    use crate::geometry::{euclidean, nearest_particle, PointSet};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_count(g: &FermatGraph, x: &[f64]) -> u64 {
        let p = g.points();
        let m = p.len();
        // modified distance straight from its definition
        let dx: Vec<f64> = (0..m)
            .map(|y| {
                (0..m)
                    .map(|q| {
                        let e = euclidean(x, p.row(q)).unwrap();
                        let e = if e == 0.0 { 0.0 } else { e.powf(g.alpha()) };
                        e + g.pairwise().get(q, y)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut c = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                if dx[i] <= g.pairwise().get(i, j) && dx[j] <= g.pairwise().get(i, j) {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn midpoint_of_a_single_pair_is_inside() {
        let q = PointSet::new(vec![0.0, 2.0], 2, 1).unwrap();
        let g = build_fermat_graph(&q, 1.0).unwrap();
        assert_eq!(lens_depth(&g, &[1.0], LensMode::Modified).unwrap(), 1.0);
        assert_eq!(lens_depth(&g, &[5.0], LensMode::Modified).unwrap(), 0.0);
    }

    #[test]
    fn beyond_every_radius_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..1.0)).collect();
        let q = PointSet::new(data, 30, 2).unwrap();
        let g = build_fermat_graph(&q, 3.0).unwrap();
        let x = [4.0, 4.0];
        let min_cost = g.entry_costs(&x).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        assert!(min_cost > g.pairwise().max_entry());
        assert_eq!(lens_depth(&g, &x, LensMode::Modified).unwrap(), 0.0);
        // the snapped variant does not vanish
        assert!(lens_depth(&g, &x, LensMode::Unmodified).unwrap() > 0.0);
    }

    #[test]
    fn matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..1.0)).collect();
        let q = PointSet::new(data, 30, 2).unwrap();
        let g = build_fermat_graph(&q, 3.0).unwrap();
        for _ in 0..50 {
            let x = [rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2)];
            let (hits, pairs) = lens_count(&g, &x, LensMode::Modified).unwrap();
            assert_eq!(pairs, 435);
            assert_eq!(hits, brute_force_count(&g, &x));
        }
    }

    #[test]
    fn needs_two_points() {
        let q = PointSet::new(vec![0.0, 2.0], 2, 1).unwrap();
        let g = build_fermat_graph(&q, 1.0).unwrap();
        assert!(lens_depth(&g, &[0.0, 0.0], LensMode::Modified).is_err());
    }

    #[test]
    fn unmodified_depth_is_constant_on_voronoi_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
        let q = PointSet::new(data, 40, 2).unwrap();
        let g = build_fermat_graph(&q, 5.0).unwrap();
        let mut differs = false;
        for _ in 0..100 {
            let x = [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)];
            let (i, _) = nearest_particle(&x, &q).unwrap();
            let snapped = q.row(i);
            assert_eq!(
                lens_depth(&g, &x, LensMode::Unmodified).unwrap(),
                lens_depth(&g, snapped, LensMode::Unmodified).unwrap()
            );
            differs |= lens_depth(&g, &x, LensMode::Modified).unwrap()
                != lens_depth(&g, snapped, LensMode::Modified).unwrap();
        }
        assert!(differs);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn depth_is_a_fraction_and_order_invariant(
            rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 2..20),
            alpha in 1.0f64..8.0,
            x in prop::collection::vec(-3.0f64..3.0, 2),
            seed in any::<u64>(),
        ) {
            let q = PointSet::from_rows(&rows).unwrap();
            let g = build_fermat_graph(&q, alpha).unwrap();
            let ld = lens_depth(&g, &x, LensMode::Modified).unwrap();
            prop_assert!((0.0..=1.0).contains(&ld));

            let mut perm: Vec<usize> = (0..rows.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
            let gp = build_fermat_graph(&PointSet::from_rows(&shuffled).unwrap(), alpha).unwrap();
            prop_assert_eq!(lens_depth(&gp, &x, LensMode::Modified).unwrap(), ld);
        }

        #[test]
        fn far_queries_have_zero_depth(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 2..20),
            alpha in 1.0f64..8.0,
            dir in 0.0f64..std::f64::consts::TAU,
        ) {
            let q = PointSet::from_rows(&rows).unwrap();
            let g = build_fermat_graph(&q, alpha).unwrap();
            let mut r = 1.0;
            loop {
                let x = [r * dir.cos(), r * dir.sin()];
                let min_cost = g.points().rows().map(|p| hop_cost(crate::geometry::dist(&x, p), alpha)).fold(f64::INFINITY, f64::min);
                if min_cost > g.pairwise().max_entry() {
                    prop_assert_eq!(lens_depth(&g, &x, LensMode::Modified).unwrap(), 0.0);
                    break;
                }
                r *= 2.0;
            }
        }
    }
}
