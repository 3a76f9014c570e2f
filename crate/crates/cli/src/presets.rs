//! Published simulation parameters, one row per `(model, p, L)`.

use xcube_core::models::ModelKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub model: ModelKind,
    pub p: f64,
    pub size: usize,
    pub n_disorder: usize,
    pub tau_max: u32,
    pub n_temps: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Preset {
    /// `rpi-p0.150-L8` style name.
    pub fn name(&self) -> String {
        format!("{}-p{:.3}-L{}", self.model.as_str(), self.p, self.size)
    }
}

type Row = (f64, &'static [usize], usize, u32, usize, f64, f64);

const RPI: &[Row] = &[
    (0.000, &[4, 6], 200, 23, 56, 2.50, 6.23),
    (0.000, &[8], 200, 23, 56, 2.50, 6.00),
    (0.000, &[10], 200, 22, 56, 3.50, 6.00),
    (0.025, &[4, 6], 200, 23, 56, 2.00, 5.70),
    (0.025, &[8], 200, 23, 56, 3.10, 5.50),
    (0.025, &[10], 200, 22, 56, 3.10, 5.50),
    (0.050, &[4, 6], 200, 23, 56, 2.00, 5.73),
    (0.050, &[8], 200, 23, 56, 2.80, 5.50),
    (0.050, &[10], 200, 22, 56, 2.85, 4.50),
    (0.075, &[4, 6], 200, 23, 56, 2.00, 5.80),
    (0.075, &[8], 200, 23, 56, 2.40, 5.50),
    (0.075, &[10], 200, 22, 56, 2.40, 5.50),
    (0.100, &[4, 6], 200, 23, 56, 2.00, 5.83),
    (0.100, &[8], 200, 23, 56, 2.00, 5.50),
    (0.100, &[10], 200, 22, 56, 2.00, 5.00),
    (0.125, &[4, 6], 200, 23, 56, 1.70, 5.88),
    (0.125, &[8], 200, 23, 56, 1.65, 5.50),
    (0.125, &[10], 200, 22, 56, 1.65, 5.36),
    (0.140, &[4, 6], 200, 23, 56, 0.30, 5.93),
    (0.140, &[8], 200, 23, 56, 0.30, 5.50),
    (0.140, &[10], 200, 22, 56, 1.10, 5.00),
    (0.142, &[4, 6], 800, 23, 56, 1.30, 5.50),
    (0.142, &[8], 800, 23, 56, 1.30, 5.00),
    (0.142, &[10], 800, 22, 56, 1.30, 5.00),
    (0.144, &[4, 6], 800, 23, 56, 1.15, 5.50),
    (0.144, &[8], 800, 23, 56, 1.15, 5.36),
    (0.144, &[10], 800, 22, 56, 1.15, 5.36),
    (0.146, &[4, 6], 800, 23, 56, 1.10, 5.33),
    (0.146, &[8], 800, 23, 56, 1.10, 5.00),
    (0.146, &[10], 800, 22, 56, 1.10, 5.00),
    (0.148, &[4, 6], 800, 23, 56, 1.10, 5.33),
    (0.148, &[8], 800, 23, 56, 1.10, 5.00),
    (0.148, &[10], 800, 22, 56, 1.10, 5.00),
    (0.150, &[4, 6], 800, 23, 56, 1.00, 5.38),
    (0.150, &[8], 800, 23, 56, 1.00, 5.46),
    (0.150, &[10], 800, 22, 56, 1.00, 5.46),
    (0.152, &[4, 6], 1600, 23, 56, 1.00, 5.00),
    (0.152, &[8], 1600, 23, 56, 1.00, 5.46),
    (0.152, &[10], 1600, 22, 56, 1.00, 5.46),
    (0.154, &[4, 6, 8], 1600, 23, 56, 1.00, 5.00),
    (0.154, &[10], 1600, 22, 56, 1.00, 5.00),
    (0.156, &[4, 6, 8], 1600, 23, 56, 0.70, 5.00),
    (0.156, &[10], 1600, 22, 56, 0.70, 5.00),
];

const RACAT: &[Row] = &[
    (0.020, &[6, 8], 200, 22, 64, 0.80, 2.79),
    (0.020, &[10], 200, 22, 64, 1.17, 2.29),
    (0.020, &[12], 200, 22, 64, 1.27, 2.13),
    (0.040, &[6, 8], 200, 22, 64, 0.98, 2.41),
    (0.040, &[10], 200, 22, 64, 1.10, 2.14),
    (0.040, &[12], 200, 22, 64, 1.13, 2.07),
    (0.050, &[6, 8], 200, 22, 64, 0.44, 2.74),
    (0.050, &[10], 200, 22, 64, 0.81, 2.37),
    (0.050, &[12], 200, 22, 64, 1.08, 2.11),
    (0.060, &[6, 8], 200, 22, 64, 0.39, 2.78),
    (0.060, &[10], 200, 22, 64, 0.61, 2.36),
    (0.060, &[12], 200, 22, 64, 0.91, 2.14),
    (0.070, &[6, 8], 200, 22, 64, 0.30, 2.60),
    (0.070, &[10], 200, 22, 64, 0.50, 2.45),
    (0.070, &[12], 200, 22, 64, 0.66, 2.25),
    (0.072, &[6, 8], 200, 22, 56, 0.30, 2.70),
    (0.072, &[10], 200, 22, 56, 0.35, 2.50),
    (0.072, &[12], 200, 22, 56, 0.53, 2.26),
    (0.073, &[6, 8], 800, 22, 56, 0.30, 2.70),
    (0.073, &[10], 800, 22, 56, 0.35, 2.50),
    (0.073, &[12], 800, 22, 56, 0.53, 2.26),
    (0.074, &[6, 8], 800, 22, 64, 0.30, 2.60),
    (0.074, &[10], 800, 22, 64, 0.35, 2.50),
    (0.074, &[12], 800, 22, 64, 0.53, 2.25),
    (0.075, &[6, 8], 800, 22, 64, 0.30, 2.60),
    (0.075, &[10], 800, 22, 64, 0.35, 2.50),
    (0.075, &[12], 800, 22, 64, 0.53, 2.25),
    (0.076, &[6, 8], 800, 22, 64, 0.30, 2.60),
    (0.076, &[10], 800, 22, 64, 0.35, 2.50),
    (0.076, &[12], 800, 22, 64, 0.53, 2.25),
    (0.078, &[6, 8], 800, 22, 64, 0.30, 2.60),
    (0.078, &[10], 800, 22, 64, 0.35, 2.50),
    (0.078, &[12], 800, 22, 64, 0.51, 2.23),
];

/// Every preset, expanded to one entry per size.
pub fn all() -> Vec<Preset> {
    let expand = |model, rows: &[Row]| -> Vec<Preset> {
        rows.iter()
            .flat_map(|&(p, sizes, n_disorder, tau_max, n_temps, t_min, t_max)| {
                sizes.iter().map(move |&size| Preset {
                    model,
                    p,
                    size,
                    n_disorder,
                    tau_max,
                    n_temps,
                    t_min,
                    t_max,
                })
            })
            .collect()
    };
    let mut out = expand(ModelKind::Rpi, RPI);
    out.extend(expand(ModelKind::Racat, RACAT));
    out
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name() == name)
}
