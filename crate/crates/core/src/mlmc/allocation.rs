use super::ToleranceSchedule;

/// Smallest integer `≥ x`, treating values within rounding of an integer as that integer.
pub fn ceil_count(x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    let r = x.round();
    if (x - r).abs() <= 1e-10 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Lower bounds for `M_1..M_L` from the cost theorem; `tol` is the final tolerance `Tol_L`.
pub fn theoretical_bounds(tol1: f64, q: f64, levels: usize, s: f64, vu: f64) -> Vec<f64> {
    let tol = tol1 * q.powi(levels as i32 - 1);
    let mut out = vec![12.0 * (tol1 * tol1 / 4.0 + vu) / (tol * tol)];
    let c = 2.0 * (1.0 + 1.0 / q).powi(2);
    let big_l = levels as f64;
    for l in 2..=levels {
        let l = l as f64;
        let bound = if (s - 2.0).abs() < 1e-12 {
            c * big_l * q.powf(2.0 * (l - big_l))
        } else if s < 2.0 {
            c / (1.0 - q.powf((2.0 - s) / 2.0)) * q.powf((s + 2.0) / 2.0 * (l - 1.0) + 2.0 * (1.0 - big_l))
        } else {
            c / (1.0 - q.powf((s - 2.0) / 2.0)) * q.powf((s + 2.0) / 2.0 * (l - big_l))
        };
        out.push(bound);
    }
    out
}

/// Sample counts of the cost theorem for `schedule.levels` levels, work exponent `s` and `V[u] = vu`.
pub fn allocate_theoretical(schedule: &ToleranceSchedule, s: f64, vu: f64) -> Vec<usize> {
    theoretical_bounds(schedule.tol1, schedule.q, schedule.levels, s, vu).into_iter().map(ceil_count).collect()
}

/// Giles allocation `⌈2 Tol⁻² √(V_l/C_l) Σ_k √(V_k C_k)⌉`, at least `m_min`.
pub fn allocate_giles(stats: &[(f64, f64)], tol: f64, m_min: usize) -> Vec<usize> {
    let total: f64 = stats.iter().map(|&(v, c)| (v * c).sqrt()).sum();
    stats
        .iter()
        .map(|&(v, c)| ceil_count(2.0 / (tol * tol) * (v / c).sqrt() * total).max(m_min))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(tol1: f64, q: f64, levels: usize) -> ToleranceSchedule {
        ToleranceSchedule { tol1, q, levels, eta1_norm: tol1 / (2.0 * std::f64::consts::SQRT_2), c_est: 1.0 }
    }

    #[test]
    fn worked_values() {
        assert_eq!(allocate_theoretical(&schedule(1.0, 0.5, 1), 2.0, 1.0), vec![15]);
        assert_eq!(allocate_theoretical(&schedule(1.0, 0.5, 3), 2.0, 1.0)[1], 216);
        assert_eq!(allocate_theoretical(&schedule(1.0, 0.5, 2), 1.0, 1.0)[1], 87);
    }

    #[test]
    fn giles_examples() {
        let tol: f64 = 0.3;
        assert_eq!(allocate_giles(&[(tol * tol / 2.0, 1.0)], tol, 7), vec![7]);
        assert_eq!(allocate_giles(&[(tol * tol / 2.0, 1.0)], tol, 0), vec![1]);
        let s = [(1.0, 2.0), (0.1, 8.0), (0.01, 32.0)];
        let d: Vec<(f64, f64)> = s.iter().map(|&(v, c)| (v, 2.0 * c)).collect();
        assert_eq!(allocate_giles(&s, 0.1, 0), allocate_giles(&d, 0.1, 0));
        assert_eq!(allocate_giles(&[(0.0, 1.0)], 0.1, 3), vec![3]);
    }

    #[test]
    fn ceil_count_absorbs_rounding() {
        assert_eq!(ceil_count(216.00000000000003), 216);
        assert_eq!(ceil_count(216.001), 217);
        assert_eq!(ceil_count(0.0), 0);
    }
}
