use billiard_core::analysis::{diffusion_exponent_from, fit_power_law};
use billiard_core::dynamics::{advance_observed, AdvanceOptions};
use billiard_core::ensemble::{geometric_grid, initial_state};
use billiard_core::geometry::Segment;
use billiard_core::{Table, TableSpec};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = TableSpec> {
    prop_oneof![
        (3u32..40, 0.2f64..5.0).prop_map(|(m, r)| TableSpec::Polygon { m, r }),
        (0.2f64..5.0).prop_map(|r| TableSpec::Circle { r }),
        (0.5f64..3.0, 0.05f64..0.45).prop_map(|(l, f)| TableSpec::Sinai { l, radius: f * l }),
    ]
}

fn wall_residual(seg: &Segment, p: billiard_core::Vec2) -> f64 {
    match *seg {
        Segment::Line { start, normal, .. } => (p - start).dot(normal).abs(),
        Segment::Arc { center, radius, .. } => ((p - center).norm() - radius).abs(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_is_periodic_and_on_the_wall(spec in spec_strategy(), u in 0.0f64..1.0) {
        let table = Table::new(spec).unwrap();
        let p = table.perimeter();
        let s = u * p;
        let a = table.boundary_point(s);
        let b = table.boundary_point(s + p);
        prop_assert!(a.position.distance(b.position) <= 1e-12 * p);
        prop_assert!(wall_residual(&table.segments()[a.segment], a.position) <= 1e-12 * table.scale());
        // A short step along the inward normal lands inside.
        if let Some(n) = a.normal {
            prop_assert!(table.contains(a.position + n * (1e-6 * table.scale())));
        }
    }

    #[test]
    fn initial_states_are_inside(spec in spec_strategy(), seed in any::<u64>(), i in 0usize..1000) {
        let table = Table::new(spec).unwrap();
        let s = initial_state(&table, seed, i);
        prop_assert!(table.contains(s.position));
        prop_assert!((s.direction.norm() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn speed_and_boundary_residence(spec in spec_strategy(), seed in any::<u64>()) {
        let table = Table::new(spec).unwrap();
        let t_max = 2_000.0 * table.mean_collision_time();
        let tol = 1e-12 * table.scale();
        let mut worst_speed: f64 = 0.0;
        let mut worst_wall: f64 = 0.0;
        let out = advance_observed(
            &table,
            initial_state(&table, seed, 0),
            t_max,
            &[],
            None,
            &AdvanceOptions::default(),
            |ev, d| {
                worst_speed = worst_speed.max((d.norm() - 1.0).abs());
                worst_wall = worst_wall.max(wall_residual(&table.segments()[ev.segment], ev.position));
            },
        )
        .unwrap();
        prop_assert!(worst_speed <= 1e-12);
        prop_assert!(worst_wall <= tol, "wall residual {}", worst_wall);
        if !out.termination.is_flagged() {
            let end = out.final_state.position;
            let (lo, hi) = table.bounding_box();
            prop_assert!(end.x >= lo.x - tol && end.x <= hi.x + tol);
            prop_assert!(end.y >= lo.y - tol && end.y <= hi.y + tol);
        }
    }

    #[test]
    fn fit_is_scale_equivariant(
        amp in 1e-3f64..1e3,
        slope in -2.5f64..2.5,
        c in 1e-2f64..1e2,
        lambda in 1e-2f64..1e2,
    ) {
        let grid = geometric_grid(1.0, 1e3, 40);
        let base: Vec<(f64, f64)> = grid.iter().map(|&t| (t, amp * t.powf(slope))).collect();
        let f0 = fit_power_law(&base, (1.0, 1e3)).unwrap();
        let scaled_y: Vec<(f64, f64)> = base.iter().map(|&(t, y)| (t, c * y)).collect();
        let f1 = fit_power_law(&scaled_y, (1.0, 1e3)).unwrap();
        prop_assert!((f1.exponent - f0.exponent).abs() <= 1e-10);
        prop_assert!((f1.intercept - f0.intercept - c.ln()).abs() <= 1e-10);
        let scaled_t: Vec<(f64, f64)> = base.iter().map(|&(t, y)| (lambda * t, y)).collect();
        let f2 = fit_power_law(&scaled_t, (lambda, lambda * 1e3)).unwrap();
        prop_assert!((f2.exponent - f0.exponent).abs() <= 1e-10);
        prop_assert_eq!(f2.points, f0.points);
    }

    #[test]
    fn diffusion_exponent_is_recovered(z0 in 1.0f64..2.0, amp in 1e-2f64..1e2) {
        let grid = geometric_grid(1.0, 1e4, 64);
        let series: Vec<(f64, f64)> = grid.iter().map(|&t| (t, amp * t.powf(2.0 / z0))).collect();
        let fit = diffusion_exponent_from(&series, (10.0, 1e4)).unwrap();
        prop_assert!((fit.z - z0).abs() <= 1e-10);
    }
}
