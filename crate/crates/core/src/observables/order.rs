use std::f64::consts::PI;

use crate::lattice::Lattice;
use crate::models::{RacatModel, RacatState, RpiModel, RpiState, SpinModel};
use crate::num::Real;

/// Plaquette-pair variables `b(c) = S_c S_{c+z}` for every cube.
pub fn z_bonds(lattice: &Lattice, state: &RpiState) -> Vec<i8> {
    let l = lattice.size();
    let layer = l * l;
    let n = lattice.n_cubes();
    (0..n).map(|c| state.spins[c] * state.spins[(c + layer) % n]).collect()
}

/// `q_A = L^-3 sum_z |sum_{x,y} S_c S_{c+z}|`.
pub fn q_a<F: Real>(lattice: &Lattice, state: &RpiState) -> F {
    let l = lattice.size();
    let b = z_bonds(lattice, state);
    let total: i64 = b.chunks(l * l).map(|layer| layer.iter().map(|&x| x as i64).sum::<i64>().abs()).sum();
    F::from_i64(total).unwrap() / F::from_usize_lossy(lattice.n_cubes())
}

/// `q_B = L^-3 sum_{x,y} |sum_z S^z_v|`.
pub fn q_b<F: Real>(lattice: &Lattice, state: &RacatState) -> F {
    let l = lattice.size();
    let layer = l * l;
    let mut total = 0i64;
    for col in 0..layer {
        let s: i64 = (0..l).map(|z| state.z(col + layer * z) as i64).sum();
        total += s.abs();
    }
    F::from_i64(total).unwrap() / F::from_usize_lossy(lattice.n_vertices())
}

/// `G^A(r)` of one configuration on the transverse grid, indexed `rx + L ry`.
pub fn correlator_ga<F: Real>(lattice: &Lattice, state: &RpiState) -> Vec<F> {
    let l = lattice.size();
    let b = z_bonds(lattice, state);
    let mut out = vec![0i64; l * l];
    for c in 0..lattice.n_cubes() {
        let (x, y, z) = lattice.coords(c);
        for ry in 0..l {
            for rx in 0..l {
                out[rx + l * ry] += (b[c] * b[lattice.index(x + rx, y + ry, z)]) as i64;
            }
        }
    }
    let n = F::from_usize_lossy(lattice.n_cubes());
    out.into_iter().map(|v| F::from_i64(v).unwrap() / n).collect()
}

/// `G^B(r) = L^-3 sum_v S^z_v S^z_{v + r z}` for `r = 0..L`.
pub fn correlator_gb<F: Real>(lattice: &Lattice, state: &RacatState) -> Vec<F> {
    let l = lattice.size();
    let layer = l * l;
    let n = lattice.n_vertices();
    let mut out = vec![0i64; l];
    for v in 0..n {
        for (r, slot) in out.iter_mut().enumerate() {
            *slot += (state.z(v) * state.z((v + r * layer) % n)) as i64;
        }
    }
    let n = F::from_usize_lossy(n);
    out.into_iter().map(|v| F::from_i64(v).unwrap() / n).collect()
}

/// `sum_r g(r) cos(2 pi m r / L)` over a ring of length `L = g.len()`.
pub fn fourier_1d<F: Real>(g: &[F], m: usize) -> F {
    let l = g.len();
    g.iter()
        .enumerate()
        .map(|(r, &v)| v * F::lit((2.0 * PI * (m * r % l) as f64 / l as f64).cos()))
        .sum()
}

/// Cosine transform of an `L x L` grid (`g[rx + L ry]`) at wave vector
/// `2 pi (mx, my) / L`.
pub fn fourier_2d<F: Real>(g: &[F], l: usize, (mx, my): (usize, usize)) -> F {
    assert_eq!(g.len(), l * l);
    let mut acc = F::zero();
    for ry in 0..l {
        for rx in 0..l {
            let phase = 2.0 * PI * ((mx * rx + my * ry) % l) as f64 / l as f64;
            acc = acc + g[rx + l * ry] * F::lit(phase.cos());
        }
    }
    acc
}

fn trig_table(l: usize) -> (Vec<f64>, Vec<f64>) {
    (0..l)
        .map(|r| {
            let a = 2.0 * PI * r as f64 / l as f64;
            (a.cos(), a.sin())
        })
        .unzip()
}

/// `(G~(0), G~(k_min))` of one configuration, computed as power spectra of
/// the layer sums rather than by transforming `G(r)`. For `G^A` the value at
/// `k_min` averages the x and y directions.
pub fn structure_factors_a(lattice: &Lattice, state: &RpiState) -> (f64, f64) {
    let l = lattice.size();
    let (cos, sin) = trig_table(l);
    let b = z_bonds(lattice, state);
    let (mut s0, mut sk) = (0.0, 0.0);
    for layer in b.chunks(l * l) {
        let mut sum = 0.0;
        let (mut xr, mut xi, mut yr, mut yi) = (0.0, 0.0, 0.0, 0.0);
        for y in 0..l {
            for x in 0..l {
                let v = layer[x + l * y] as f64;
                sum += v;
                xr += v * cos[x];
                xi += v * sin[x];
                yr += v * cos[y];
                yi += v * sin[y];
            }
        }
        s0 += sum * sum;
        sk += 0.5 * (xr * xr + xi * xi + yr * yr + yi * yi);
    }
    let n = lattice.n_cubes() as f64;
    (s0 / n, sk / n)
}

/// `(G~(0), G~(k_min))` of `G^B` with `k_min = 2 pi / L` along z.
pub fn structure_factors_b(lattice: &Lattice, state: &RacatState) -> (f64, f64) {
    let l = lattice.size();
    let layer = l * l;
    let (cos, sin) = trig_table(l);
    let (mut s0, mut sk) = (0.0, 0.0);
    for col in 0..layer {
        let (mut sum, mut re, mut im) = (0.0, 0.0, 0.0);
        for z in 0..l {
            let v = state.z(col + layer * z) as f64;
            sum += v;
            re += v * cos[z];
            im += v * sin[z];
        }
        s0 += sum * sum;
        sk += re * re + im * im;
    }
    let n = lattice.n_vertices() as f64;
    (s0 / n, sk / n)
}

/// Shape of a model's correlator grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelatorShape {
    /// `L x L` transverse displacements.
    Transverse(usize),
    /// `L` displacements along one axis.
    Axial(usize),
}

impl CorrelatorShape {
    pub fn len(self) -> usize {
        match self {
            CorrelatorShape::Transverse(l) => l * l,
            CorrelatorShape::Axial(l) => l,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    /// Cosine transforms `(G~(0), G~(k_min))` of a correlator on this grid.
    pub fn transforms<F: Real>(self, g: &[F]) -> (F, F) {
        match self {
            CorrelatorShape::Transverse(l) => {
                let kx = fourier_2d(g, l, (1, 0));
                let ky = fourier_2d(g, l, (0, 1));
                (fourier_2d(g, l, (0, 0)), (kx + ky) * F::lit(0.5))
            }
            CorrelatorShape::Axial(_) => (fourier_1d(g, 0), fourier_1d(g, 1)),
        }
    }
}

/// Per-configuration measurements shared by both models.
pub trait Measurable: SpinModel {
    fn order_parameter<F: Real>(&self, state: &Self::State) -> F;
    fn correlator<F: Real>(&self, state: &Self::State) -> Vec<F>;
    fn correlator_shape(&self) -> CorrelatorShape;
    /// `(G~(0), G~(k_min))` of a single configuration.
    fn structure_factors(&self, state: &Self::State) -> (f64, f64);
    /// Site-resolved correlator products for displacements `r = 0..L` along
    /// one axis, laid out `site * L + r`. Feeds the spin-glass correlator.
    fn pair_products(&self, state: &Self::State) -> Vec<i8>;
}

impl Measurable for RpiModel {
    fn order_parameter<F: Real>(&self, state: &RpiState) -> F {
        q_a(self.lattice(), state)
    }

    fn correlator<F: Real>(&self, state: &RpiState) -> Vec<F> {
        correlator_ga(self.lattice(), state)
    }

    fn correlator_shape(&self) -> CorrelatorShape {
        CorrelatorShape::Transverse(self.lattice().size())
    }

    fn structure_factors(&self, state: &RpiState) -> (f64, f64) {
        structure_factors_a(self.lattice(), state)
    }

    /// `b(c) b(c + r x)`.
    fn pair_products(&self, state: &RpiState) -> Vec<i8> {
        let lat = self.lattice();
        let l = lat.size();
        let b = z_bonds(lat, state);
        let mut out = Vec::with_capacity(b.len() * l);
        for c in 0..b.len() {
            let (x, y, z) = lat.coords(c);
            out.extend((0..l).map(|r| b[c] * b[lat.index(x + r, y, z)]));
        }
        out
    }
}

impl Measurable for RacatModel {
    fn order_parameter<F: Real>(&self, state: &RacatState) -> F {
        q_b(self.lattice(), state)
    }

    fn correlator<F: Real>(&self, state: &RacatState) -> Vec<F> {
        correlator_gb(self.lattice(), state)
    }

    fn correlator_shape(&self) -> CorrelatorShape {
        CorrelatorShape::Axial(self.lattice().size())
    }

    fn structure_factors(&self, state: &RacatState) -> (f64, f64) {
        structure_factors_b(self.lattice(), state)
    }

    /// `S^z_v S^z_{v + r z}`.
    fn pair_products(&self, state: &RacatState) -> Vec<i8> {
        let lat = self.lattice();
        let l = lat.size();
        let layer = l * l;
        let n = lat.n_vertices();
        let mut out = Vec::with_capacity(n * l);
        for v in 0..n {
            out.extend((0..l).map(|r| state.z(v) * state.z((v + r * layer) % n)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Pauli;
    use crate::lattice::Axis;
    use crate::models::{Disorder, PlaneSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rpi(l: usize) -> RpiModel {
        let lat = Arc::new(Lattice::new(l).unwrap());
        let dis = Arc::new(Disorder::sample(&lat, 0.2, Pauli::X, 1).unwrap());
        RpiModel::new(lat, dis).unwrap()
    }

    fn racat(l: usize) -> RacatModel {
        let lat = Arc::new(Lattice::new(l).unwrap());
        let dis = Arc::new(Disorder::sample(&lat, 0.2, Pauli::Z, 1).unwrap());
        RacatModel::new(lat, dis).unwrap()
    }

    #[test]
    fn ordered_states_have_unit_order_and_correlators() {
        let m = rpi(4);
        let s = m.uniform_state();
        assert_eq!(q_a::<f64>(m.lattice(), &s), 1.0);
        assert!(correlator_ga::<f64>(m.lattice(), &s).iter().all(|&g| g == 1.0));
        let m = racat(4);
        let s = m.uniform_state();
        assert_eq!(q_b::<f64>(m.lattice(), &s), 1.0);
        assert!(correlator_gb::<f64>(m.lattice(), &s).iter().all(|&g| g == 1.0));
    }

    #[test]
    fn order_parameters_ignore_every_plane_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rpi(4);
        let b = racat(4);
        let sa = a.random_state(&mut rng);
        let sb = b.random_state(&mut rng);
        let (qa, qb): (f64, f64) = (a.order_parameter(&sa), b.order_parameter(&sb));
        for normal in Axis::ALL {
            for coord in 0..4 {
                let plane = PlaneSpec { normal, coord };
                let mut t = sa.clone();
                a.plane_flip(&mut t, plane).unwrap();
                assert_eq!(a.order_parameter::<f64>(&t), qa);
                let mut t = sb.clone();
                b.plane_flip(&mut t, plane).unwrap();
                assert_eq!(b.order_parameter::<f64>(&t), qb);
            }
        }
        let mut up = a.uniform_state();
        a.plane_flip(&mut up, PlaneSpec { normal: Axis::Z, coord: 2 }).unwrap();
        assert_eq!(q_a::<f64>(a.lattice(), &up), 1.0);
    }

    #[test]
    fn random_states_are_weakly_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = rpi(10);
        let mean: f64 = (0..20).map(|_| q_a::<f64>(m.lattice(), &m.random_state(&mut rng))).sum::<f64>() / 20.0;
        assert!(mean < 0.2, "{mean}");
    }

    #[test]
    fn zero_displacement_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rpi(3);
        let b = racat(3);
        for _ in 0..5 {
            assert_eq!(a.correlator::<f64>(&a.random_state(&mut rng))[0], 1.0);
            assert_eq!(b.correlator::<f64>(&b.random_state(&mut rng))[0], 1.0);
        }
    }

    #[test]
    fn structure_factors_match_transformed_correlator() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for l in [2, 3, 5] {
            let a = rpi(l);
            let b = racat(l);
            for _ in 0..5 {
                let s = a.random_state(&mut rng);
                let (g0, gk) = a.correlator_shape().transforms(&a.correlator::<f64>(&s));
                let (f0, fk) = a.structure_factors(&s);
                assert!((g0 - f0).abs() < 1e-9 && (gk - fk).abs() < 1e-9, "L={l}");
                let s = b.random_state(&mut rng);
                let (g0, gk) = b.correlator_shape().transforms(&b.correlator::<f64>(&s));
                let (f0, fk) = b.structure_factors(&s);
                assert!((g0 - f0).abs() < 1e-9 && (gk - fk).abs() < 1e-9, "L={l}");
            }
        }
    }

    #[test]
    fn pair_products_average_to_correlator() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = 4;
        let a = rpi(l);
        let s = a.random_state(&mut rng);
        let g: Vec<f64> = a.correlator(&s);
        let pp = a.pair_products(&s);
        for r in 0..l {
            let mean = (0..a.n_sites()).map(|c| pp[c * l + r] as f64).sum::<f64>() / a.n_sites() as f64;
            assert!((mean - g[r]).abs() < 1e-12);
        }
        let b = racat(l);
        let s = b.random_state(&mut rng);
        let g: Vec<f64> = b.correlator(&s);
        let pp = b.pair_products(&s);
        let nv = b.lattice().n_vertices();
        for r in 0..l {
            let mean = (0..nv).map(|v| pp[v * l + r] as f64).sum::<f64>() / nv as f64;
            assert!((mean - g[r]).abs() < 1e-12);
        }
    }
}
