//! Geometric multipath channel model for the Tx, RIS and Rx arrays.
//!
//! Steering vectors use the `exp(+j*pi*m*phi)` entry convention throughout.
//! RIS responses are laid out as the Kronecker product of the x-axis factor
//! and the y-axis factor, so element `(ix, iy)` (0-based) lives at flat index
//! `ix * ny + iy`. Everything that builds a reflection vector for the RIS
//! (see [`crate::partition`]) uses the same layout.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Speed of light used for wavelength conversion (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array at the Tx or the Rx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    element_count: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(element_count: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::Geometry("array needs at least one element".into()));
        }
        if !(spacing > 0.0 && wavelength > 0.0) {
            return Err(Error::Geometry(format!(
                "spacing ({spacing}) and wavelength ({wavelength}) must be positive"
            )));
        }
        Ok(Self {
            element_count,
            spacing,
            wavelength,
        })
    }

    /// Half-wavelength array with unit wavelength.
    pub fn half_wavelength(element_count: usize) -> Result<Self> {
        Self::new(element_count, 0.5, 1.0)
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `2d/lambda`, the factor mapping `sin(theta)` to the steering argument.
    pub fn spacing_factor(&self) -> f64 {
        2.0 * self.spacing / self.wavelength
    }
}

/// Uniform rectangular RIS in the x-y plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisGeometry {
    nx: usize,
    ny: usize,
    spacing: f64,
    wavelength: f64,
}

impl RisGeometry {
    pub fn new(nx: usize, ny: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Geometry(format!("RIS must be at least 1x1, got {nx}x{ny}")));
        }
        if !(spacing > 0.0 && wavelength > 0.0) {
            return Err(Error::Geometry(format!(
                "spacing ({spacing}) and wavelength ({wavelength}) must be positive"
            )));
        }
        Ok(Self {
            nx,
            ny,
            spacing,
            wavelength,
        })
    }

    pub fn half_wavelength(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 0.5, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn spacing_factor(&self) -> f64 {
        2.0 * self.spacing / self.wavelength
    }

    /// Phase progression per element and unit direction cosine, `k = 2*pi*d/lambda`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.spacing / self.wavelength
    }

    /// Flat index of element `(ix, iy)`, both 0-based.
    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }
}

/// Normalized steering vector with entries `exp(+j*pi*m*phi)/sqrt(M)`.
pub fn steering_vector(phi: f64, m: usize) -> Result<CVector> {
    if m == 0 {
        return Err(Error::Geometry("steering vector length must be positive".into()));
    }
    let scale = 1.0 / (m as f64).sqrt();
    Ok(CVector::from_fn(m, |i, _| {
        Complex64::from_polar(scale, PI * i as f64 * phi)
    }))
}

/// ULA response for an angle measured from boresight.
pub fn ula_response(theta: f64, geometry: &ArrayGeometry) -> CVector {
    steering_vector(geometry.spacing_factor() * theta.sin(), geometry.element_count)
        .expect("geometry guarantees a positive element count")
}

/// RIS response for elevation `phi` and azimuth `vartheta`.
pub fn ris_response(elevation: f64, azimuth: f64, geometry: &RisGeometry) -> CVector {
    let (cx, cy) = direction_cosines(elevation, azimuth);
    let f = geometry.spacing_factor();
    let ex = steering_vector(f * cx, geometry.nx).expect("nx > 0");
    let ey = steering_vector(f * cy, geometry.ny).expect("ny > 0");
    ex.kronecker(&ey)
}

/// `(sin(phi)cos(vartheta), sin(phi)sin(vartheta))`.
pub fn direction_cosines(elevation: f64, azimuth: f64) -> (f64, f64) {
    let s = elevation.sin();
    (s * azimuth.cos(), s * azimuth.sin())
}

/// Which link a [`PathSet`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HopKind {
    TxRis,
    RisRx,
    TxRx,
}

impl HopKind {
    fn endpoint_kinds(self) -> (bool, bool) {
        // (departure side is RIS, arrival side is RIS)
        match self {
            HopKind::TxRis => (false, true),
            HopKind::RisRx => (true, false),
            HopKind::TxRx => (false, false),
        }
    }
}

/// A propagation direction seen from one array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// Angle from the ULA boresight (radians).
    Ula(f64),
    /// Elevation / azimuth pair at the RIS (radians).
    Planar { elevation: f64, azimuth: f64 },
}

impl Direction {
    pub fn is_planar(&self) -> bool {
        matches!(self, Direction::Planar { .. })
    }

    /// Direction cosines of a planar direction.
    pub fn cosines(&self) -> Option<(f64, f64)> {
        match *self {
            Direction::Planar { elevation, azimuth } => Some(direction_cosines(elevation, azimuth)),
            Direction::Ula(_) => None,
        }
    }
}

/// The resolvable paths of one hop, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    kind: HopKind,
    gains: Vec<Complex64>,
    departures: Vec<Direction>,
    arrivals: Vec<Direction>,
}

impl PathSet {
    /// Builds a path set and sorts it by non-increasing gain magnitude
    /// (stable, so equal magnitudes keep their input order).
    pub fn new(
        kind: HopKind,
        gains: Vec<Complex64>,
        departures: Vec<Direction>,
        arrivals: Vec<Direction>,
    ) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::EmptyPathSet);
        }
        if departures.len() != gains.len() || arrivals.len() != gains.len() {
            return Err(Error::Dimension(format!(
                "{} gains, {} departures, {} arrivals",
                gains.len(),
                departures.len(),
                arrivals.len()
            )));
        }
        let (dep_ris, arr_ris) = kind.endpoint_kinds();
        let consistent =
            departures.iter().all(|d| d.is_planar() == dep_ris) && arrivals.iter().all(|a| a.is_planar() == arr_ris);
        if !consistent {
            return Err(Error::Dimension(format!("direction kinds do not match hop {kind:?}")));
        }
        let mut order: Vec<usize> = (0..gains.len()).collect();
        order.sort_by(|&a, &b| gains[b].norm().total_cmp(&gains[a].norm()));
        Ok(Self {
            kind,
            gains: order.iter().map(|&i| gains[i]).collect(),
            departures: order.iter().map(|&i| departures[i]).collect(),
            arrivals: order.iter().map(|&i| arrivals[i]).collect(),
        })
    }

    pub fn kind(&self) -> HopKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn departures(&self) -> &[Direction] {
        &self.departures
    }

    pub fn arrivals(&self) -> &[Direction] {
        &self.arrivals
    }
}

/// Deterministic generator for realization `index` under `master_seed`.
///
/// ChaCha8 keyed by `master_seed` (expanded with the PCG32 constants used by
/// `seed_from_u64`), with the 64-bit stream id set to `index`. Streams are
/// independent, so realizations can be generated in any order or in parallel.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw on `(0, upper]`.
fn uniform_half_open<R: Rng + ?Sized>(rng: &mut R, upper: f64) -> f64 {
    let u: f64 = rng.random();
    upper * (1.0 - u)
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn sample_cscg<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn sample_direction<R: Rng + ?Sized>(rng: &mut R, planar: bool) -> Direction {
    if planar {
        let elevation = uniform_half_open(rng, PI / 2.0);
        let azimuth = uniform_half_open(rng, 2.0 * PI);
        Direction::Planar { elevation, azimuth }
    } else {
        Direction::Ula(uniform_half_open(rng, 2.0 * PI))
    }
}

/// Draws `count` paths for one hop: continuous uniform angles, CSCG gains.
pub fn sample_paths<R: Rng + ?Sized>(rng: &mut R, count: usize, kind: HopKind) -> Result<PathSet> {
    if count == 0 {
        return Err(Error::EmptyPathSet);
    }
    let (dep_ris, arr_ris) = kind.endpoint_kinds();
    let mut gains = Vec::with_capacity(count);
    let mut departures = Vec::with_capacity(count);
    let mut arrivals = Vec::with_capacity(count);
    for _ in 0..count {
        departures.push(sample_direction(rng, dep_ris));
        arrivals.push(sample_direction(rng, arr_ris));
        gains.push(sample_cscg(rng));
    }
    PathSet::new(kind, gains, departures, arrivals)
}

/// One side of a hop.
#[derive(Debug, Clone, Copy)]
pub enum Endpoint<'a> {
    Ula(&'a ArrayGeometry),
    Ris(&'a RisGeometry),
}

impl Endpoint<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Endpoint::Ula(g) => g.element_count(),
            Endpoint::Ris(g) => g.element_count(),
        }
    }

    pub fn response(&self, direction: &Direction) -> Result<CVector> {
        match (self, direction) {
            (Endpoint::Ula(g), Direction::Ula(theta)) => Ok(ula_response(*theta, g)),
            (Endpoint::Ris(g), Direction::Planar { elevation, azimuth }) => Ok(ris_response(*elevation, *azimuth, g)),
            _ => Err(Error::Dimension("direction kind does not match array kind".into())),
        }
    }
}

/// `sqrt(dim_rx*dim_tx/L) * sum_l gain_l * a_rx(arrival_l) * a_tx(departure_l)^H`.
pub fn synth_channel(paths: &PathSet, tx: Endpoint<'_>, rx: Endpoint<'_>) -> Result<CMatrix> {
    let (dep_ris, arr_ris) = paths.kind().endpoint_kinds();
    if matches!(tx, Endpoint::Ris(_)) != dep_ris || matches!(rx, Endpoint::Ris(_)) != arr_ris {
        return Err(Error::Dimension(format!(
            "endpoints do not match hop {:?}",
            paths.kind()
        )));
    }
    let (rows, cols) = (rx.dim(), tx.dim());
    let scale = ((rows * cols) as f64 / paths.len() as f64).sqrt();
    let mut h = CMatrix::zeros(rows, cols);
    for ((gain, dep), arr) in paths.gains().iter().zip(paths.departures()).zip(paths.arrivals()) {
        let a_rx = rx.response(arr)?;
        let a_tx = tx.response(dep)?;
        h += (a_rx * a_tx.adjoint()) * (*gain * scale);
    }
    Ok(h)
}

/// Linear (dimensionless) path losses of the cascaded and the direct link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub cascaded: f64,
    pub direct: f64,
}

/// `PL_r = lambda^2 / (64 pi^3 d1^e d2^e)`, `PL_d = lambda^2 / (16 pi^2 d3^e)`.
pub fn path_loss(wavelength: f64, d1: f64, d2: f64, d3: f64, exponent: f64) -> PathLoss {
    let l2 = wavelength * wavelength;
    PathLoss {
        cascaded: l2 / (64.0 * PI.powi(3) * d1.powf(exponent) * d2.powf(exponent)),
        direct: l2 / (16.0 * PI * PI * d3.powf(exponent)),
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// System parameters of one simulated scenario. Powers are stored in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub m_t: usize,
    pub m_r: usize,
    pub nx: usize,
    pub ny: usize,
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Carrier frequency (Hz).
    pub carrier_frequency: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub path_loss_exponent: f64,
    /// Transmit power budget (W).
    pub transmit_power: f64,
    /// Noise power (W).
    pub noise_power: f64,
    /// Bandwidth (Hz), only used to report bit/s.
    pub bandwidth: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            m_t: 32,
            m_r: 32,
            nx: 30,
            ny: 90,
            l1: 5,
            l2: 7,
            l3: 4,
            spacing_wavelengths: 0.5,
            carrier_frequency: 28e9,
            d1: 100.0,
            d2: 60.0,
            d3: 150.0,
            path_loss_exponent: 2.4,
            transmit_power: dbm_to_watts(30.0),
            noise_power: dbm_to_watts(-90.0),
            bandwidth: 251.1886e6,
            realizations: 1000,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_wavelengths * self.wavelength()
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.m_t, self.spacing(), self.wavelength())
    }

    pub fn rx_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.m_r, self.spacing(), self.wavelength())
    }

    pub fn ris_geometry(&self) -> Result<RisGeometry> {
        RisGeometry::new(self.nx, self.ny, self.spacing(), self.wavelength())
    }

    pub fn path_loss(&self) -> PathLoss {
        path_loss(self.wavelength(), self.d1, self.d2, self.d3, self.path_loss_exponent)
    }

    /// Rejects non-positive parameters; returns warnings for violations of the
    /// sparse-scattering resolution assumption (not enforced).
    pub fn validate(&self) -> Result<Vec<String>> {
        let counts = [
            ("M_t", self.m_t),
            ("M_r", self.m_r),
            ("N_x", self.nx),
            ("N_y", self.ny),
            ("L1", self.l1),
            ("L2", self.l2),
            ("realizations", self.realizations),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        let reals = [
            ("d", self.spacing_wavelengths),
            ("f", self.carrier_frequency),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("path_loss_exponent", self.path_loss_exponent),
            ("P", self.transmit_power),
            ("sigma2", self.noise_power),
        ];
        for (name, value) in reals {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {value}")));
            }
        }
        let mut warnings = Vec::new();
        if self.l1 + self.l3 >= self.m_t {
            warnings.push(format!(
                "L1+L3 = {} is not small against M_t = {}",
                self.l1 + self.l3,
                self.m_t
            ));
        }
        if self.l2 + self.l3 >= self.m_r {
            warnings.push(format!(
                "L2+L3 = {} is not small against M_r = {}",
                self.l2 + self.l3,
                self.m_r
            ));
        }
        let n = self.nx * self.ny;
        if self.l1.max(self.l2) >= n {
            warnings.push(format!("L1/L2 are not small against N = {n}"));
        }
        Ok(warnings)
    }
}

/// One draw of the three-hop channel.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Tx to RIS, `N x M_t`.
    pub h1: CMatrix,
    /// RIS to Rx, `M_r x N`.
    pub h2: CMatrix,
    /// Tx to Rx, `M_r x M_t`.
    pub h3: CMatrix,
    pub path_loss: PathLoss,
    pub noise_power: f64,
    pub tx_ris: PathSet,
    pub ris_rx: PathSet,
    /// `None` when the direct link is blocked (`L3 = 0`).
    pub tx_rx: Option<PathSet>,
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub ris: RisGeometry,
}

impl ChannelRealization {
    /// Synthesizes the three matrices from already-drawn path sets.
    pub fn from_paths(
        config: &SimulationConfig,
        tx_ris: PathSet,
        ris_rx: PathSet,
        tx_rx: Option<PathSet>,
    ) -> Result<Self> {
        let tx = config.tx_geometry()?;
        let rx = config.rx_geometry()?;
        let ris = config.ris_geometry()?;
        let h1 = synth_channel(&tx_ris, Endpoint::Ula(&tx), Endpoint::Ris(&ris))?;
        let h2 = synth_channel(&ris_rx, Endpoint::Ris(&ris), Endpoint::Ula(&rx))?;
        let h3 = match &tx_rx {
            Some(paths) => synth_channel(paths, Endpoint::Ula(&tx), Endpoint::Ula(&rx))?,
            None => CMatrix::zeros(rx.element_count(), tx.element_count()),
        };
        Ok(Self {
            h1,
            h2,
            h3,
            path_loss: config.path_loss(),
            noise_power: config.noise_power,
            tx_ris,
            ris_rx,
            tx_rx,
            tx,
            rx,
            ris,
        })
    }

    /// Draws paths for all three hops, in the order Tx-RIS, RIS-Rx, Tx-Rx.
    pub fn sample<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> Result<Self> {
        let (tx_ris, ris_rx, tx_rx) = sample_hops(config, rng)?;
        Self::from_paths(config, tx_ris, ris_rx, tx_rx)
    }
}

/// Draws the three path sets of a scenario without synthesizing matrices.
pub fn sample_hops<R: Rng + ?Sized>(
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<(PathSet, PathSet, Option<PathSet>)> {
    let tx_ris = sample_paths(rng, config.l1, HopKind::TxRis)?;
    let ris_rx = sample_paths(rng, config.l2, HopKind::RisRx)?;
    let tx_rx = match config.l3 {
        0 => None,
        l3 => Some(sample_paths(rng, l3, HopKind::TxRx)?),
    };
    Ok((tx_ris, ris_rx, tx_rx))
}

/// Checks that every reflection coefficient has unit modulus.
pub fn check_unit_modulus(theta: &[Complex64]) -> Result<()> {
    for (index, z) in theta.iter().enumerate() {
        let modulus = z.norm();
        if (modulus - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitModulus { index, modulus });
        }
    }
    Ok(())
}

/// `sqrt(PL_r) * H2 * diag(theta) * H1 + sqrt(PL_d) * H3`.
pub fn effective_channel(realization: &ChannelRealization, theta: &[Complex64]) -> Result<CMatrix> {
    let n = realization.h1.nrows();
    if theta.len() != n || realization.h2.ncols() != n {
        return Err(Error::Dimension(format!(
            "theta has {} entries, RIS has {n} elements",
            theta.len()
        )));
    }
    check_unit_modulus(theta)?;
    let mut h2_theta = realization.h2.clone();
    for (j, mut col) in h2_theta.column_iter_mut().enumerate() {
        col *= theta[j];
    }
    let cascaded = h2_theta * &realization.h1;
    Ok(cascaded * Complex64::from(realization.path_loss.cascaded.sqrt())
        + &realization.h3 * Complex64::from(realization.path_loss.direct.sqrt()))
}
