//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

/// Kronrod abscissae on [0, 1], descending; the last is the centre.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(relative: f64) -> Self {
        Tolerance {
            relative,
            absolute: 0.0,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Panel<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kronrod[k] = fc[k] * WGK[7];
        gauss[k] = fc[k] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        value[k] = kronrod[k] * half;
        error[k] = ((kronrod[k] - gauss[k]) * half).abs();
    }
    Panel { a, b, value, error }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub intervals: usize,
    pub converged: bool,
}

/// Integrate `f` over `[a, b]`, splitting first at every breakpoint inside the
/// interval. Each component must meet `|err| <= max(absolute, relative * |I|)`.
///
/// The panel refinement order is fixed, so the result is bit-reproducible.
pub fn integrate<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Integral<N>
where
    F: FnMut(f64) -> [f64; N],
{
    if !(b > a) {
        return Integral {
            value: [0.0; N],
            error: [0.0; N],
            intervals: 0,
            converged: true,
        };
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);

    let mut panels: Vec<Panel<N>> = nodes
        .windows(2)
        .map(|w| gk15(&mut f, w[0], w[1]))
        .collect();

    loop {
        let (value, error) = totals(&panels);
        let limit: [f64; N] =
            std::array::from_fn(|k| tol.absolute.max(tol.relative * value[k].abs()));
        let converged = (0..N).all(|k| error[k] <= limit[k]);
        if converged || panels.len() >= tol.max_intervals {
            return Integral {
                value,
                error,
                intervals: panels.len(),
                converged,
            };
        }
        // split the panel with the worst error relative to its component's budget
        let score = |p: &Panel<N>| -> f64 {
            (0..N)
                .map(|k| {
                    if limit[k] > 0.0 {
                        p.error[k] / limit[k]
                    } else {
                        p.error[k] * f64::MAX.sqrt()
                    }
                })
                .fold(0.0, f64::max)
        };
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, p)| {
                let s = score(p);
                if s > best.1 {
                    (i, s)
                } else {
                    best
                }
            });
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // cannot split further in floating point
            return Integral {
                value,
                error,
                intervals: panels.len(),
                converged: false,
            };
        }
        panels[worst] = gk15(&mut f, p.a, mid);
        panels.push(gk15(&mut f, mid, p.b));
    }
}

fn totals<const N: usize>(panels: &[Panel<N>]) -> ([f64; N], [f64; N]) {
    let mut value = [NeumaierSum::default(); N];
    let mut error = [0.0; N];
    // sum in position order so the total does not depend on refinement history
    let mut order: Vec<&Panel<N>> = panels.iter().collect();
    order.sort_by(|x, y| x.a.total_cmp(&y.a));
    for p in order {
        for k in 0..N {
            value[k].add(p.value[k]);
            error[k] += p.error[k];
        }
    }
    (std::array::from_fn(|k| value[k].total()), error)
}

/// Compensated (Kahan-Babuska-Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| [x.powi(7) - 3.0 * x * x], -1.0, 2.0, &[], Tolerance::relative(1e-12));
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert_relative_eq!(r.value[0], exact, max_relative = 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn narrow_peak_found_with_bracketing_breakpoints() {
        let s = 1e-4;
        let g = |x: f64| [(-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp()];
        let r = integrate(g, -1.0, 1.0, &[0.3 - 6.0 * s, 0.3, 0.3 + 6.0 * s], Tolerance::relative(1e-8));
        assert_relative_eq!(r.value[0], s * (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn vector_components_integrated_together() {
        let r = integrate(|x: f64| [x.exp(), x.sin()], 0.0, 1.0, &[], Tolerance::relative(1e-12));
        assert_relative_eq!(r.value[0], 1f64.exp() - 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.value[1], 1.0 - 1f64.cos(), max_relative = 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity_converges() {
        let r = integrate(|x: f64| [x.sqrt()], 0.0, 1.0, &[], Tolerance::relative(1e-9));
        assert!(r.converged);
        assert_relative_eq!(r.value[0], 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn empty_interval() {
        let r = integrate(|_| [1.0], 1.0, 1.0, &[], Tolerance::relative(1e-6));
        assert_eq!(r.value[0], 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: NeumaierSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.total(), 2.0);
    }
}
