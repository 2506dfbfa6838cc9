//! Random streams, innovation samplers and the null reference laws.
//!
//! Streams are counter-style: a `(seed, experiment, replication)` triple keys
//! an independent ChaCha8 generator, so replication `r` of experiment `e`
//! reproduces byte-identically no matter which worker runs it or how many
//! workers exist.

// Published coefficient tables are kept verbatim.
#![allow(clippy::excessive_precision)]

use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared as ChiSquaredDist, Distribution, Exp1, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{require, Error, Result};

/// Value-type descriptor of one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    experiment: u64,
    replication: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            experiment: 0,
            replication: 0,
        }
    }

    /// Stream for `(experiment, replication)` under the same seed.
    pub fn substream(self, experiment: u64, replication: u64) -> Self {
        Self {
            seed: self.seed,
            experiment,
            replication,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Instantiate the generator for this stream.
    pub fn rng(self) -> StreamRng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        key[16..24].copy_from_slice(&self.replication.to_le_bytes());
        // Domain constant keeps the all-zero triple away from the all-zero key.
        key[24..32].copy_from_slice(&0x9E37_79B9_7F4A_7C15u64.to_le_bytes());
        StreamRng(ChaCha8Rng::from_seed(key))
    }
}

/// Instantiated generator for one stream. Used by exactly one worker at a time.
#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

/// Mean-zero, variance-one innovation distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationKind {
    StdNormal,
    /// `scale * t(df)`; unit variance requires `scale = sqrt((df-2)/df)`.
    ScaledT { df: u32, scale: f64 },
    /// `scale * V` where `V` is `N(0, sd_wide^2)` w.p. `weight`, else
    /// `N(0, sd_narrow^2)`.
    MixtureNormal {
        weight: f64,
        sd_wide: f64,
        sd_narrow: f64,
        scale: f64,
    },
    /// `Exp(1) - 1`.
    CenteredExp,
}

impl InnovationKind {
    /// `t(df)` rescaled to unit variance.
    pub fn standardized_t(df: u32) -> Result<Self> {
        require(df >= 3, || Error::InvalidParameter {
            name: "df",
            value: df as f64,
            constraint: "t innovations need df >= 3 for a finite variance",
        })?;
        Ok(Self::ScaledT {
            df,
            scale: ((df as f64 - 2.0) / df as f64).sqrt(),
        })
    }

    /// The two-component normal mixture with weight 0.1 on `N(0, 9)`,
    /// rescaled to unit variance.
    pub fn mixture_default() -> Self {
        Self::MixtureNormal {
            weight: 0.1,
            sd_wide: 3.0,
            sd_narrow: 1.0,
            scale: 1.0 / 1.8f64.sqrt(),
        }
    }

    /// Analytic variance of the *unscaled* component (before `scale`).
    pub fn unscaled_variance(&self) -> f64 {
        match *self {
            InnovationKind::StdNormal => 1.0,
            InnovationKind::ScaledT { df, .. } => df as f64 / (df as f64 - 2.0),
            InnovationKind::MixtureNormal {
                weight,
                sd_wide,
                sd_narrow,
                ..
            } => weight * sd_wide * sd_wide + (1.0 - weight) * sd_narrow * sd_narrow,
            InnovationKind::CenteredExp => 1.0,
        }
    }

    /// Analytic variance of a draw.
    pub fn variance(&self) -> f64 {
        match *self {
            InnovationKind::StdNormal | InnovationKind::CenteredExp => 1.0,
            InnovationKind::ScaledT { scale, .. } => scale * scale * self.unscaled_variance(),
            InnovationKind::MixtureNormal { scale, .. } => {
                scale * scale * self.unscaled_variance()
            }
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            InnovationKind::StdNormal => StandardNormal.sample(rng),
            InnovationKind::ScaledT { df, scale } => {
                // t = Z / sqrt(chi2_df / df)
                let z: f64 = StandardNormal.sample(rng);
                let chi: f64 = ChiSquaredDist::new(df as f64).unwrap().sample(rng);
                scale * z / (chi / df as f64).sqrt()
            }
            InnovationKind::MixtureNormal {
                weight,
                sd_wide,
                sd_narrow,
                scale,
            } => {
                let wide = rng.random::<f64>() < weight;
                let z: f64 = StandardNormal.sample(rng);
                scale * z * if wide { sd_wide } else { sd_narrow }
            }
            InnovationKind::CenteredExp => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }

    pub fn fill(&self, buf: &mut [f64], rng: &mut StreamRng) {
        for x in buf {
            *x = self.sample(rng);
        }
    }
}

/// `n x p` matrix of i.i.d. draws, filled row-major.
pub fn sample_matrix(
    kind: InnovationKind,
    n: usize,
    p: usize,
    stream: RngStream,
) -> Result<DataMatrix> {
    let mut data = DataMatrix::zeros(n, p)?;
    let mut rng = stream.rng();
    kind.fill(data.as_mut_slice(), &mut rng);
    Ok(data)
}

// ---------------------------------------------------------------------------
// Null reference laws
// ---------------------------------------------------------------------------

/// Limit law of the centered maximum: `F(x) = exp(-exp(-x/2)/sqrt(pi))`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x / 2.0).exp() / std::f64::consts::PI.sqrt()).exp()
}

/// Upper-`alpha` critical value of the same law: `gumbel_cdf(q) = 1 - alpha`.
pub fn gumbel_quantile(alpha: f64) -> Result<f64> {
    require(alpha > 0.0 && alpha < 1.0, || Error::InvalidParameter {
        name: "alpha",
        value: alpha,
        constraint: "must lie in (0, 1)",
    })?;
    Ok(-std::f64::consts::PI.ln() - 2.0 * (-(1.0 - alpha).ln()).ln())
}

/// CDF of the minimum of two independent uniforms: `1 - (1 - w)^2` on [0, 1].
pub fn combo_cdf(w: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else if w >= 1.0 {
        1.0
    } else {
        let u = 1.0 - w;
        1.0 - u * u
    }
}

/// Rejection threshold of the combined test: reject when the min p-value
/// falls below `1 - sqrt(1 - alpha)`.
pub fn combo_threshold(alpha: f64) -> f64 {
    1.0 - (1.0 - alpha).sqrt()
}

/// Standard normal CDF, via Cody's rational approximations for erfc.
/// Absolute error stays below 1e-15 over |x| <= 8.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal survival function.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF (Wichura's PPND16 rational approximation).
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    require(alpha > 0.0 && alpha < 1.0, || Error::InvalidParameter {
        name: "alpha",
        value: alpha,
        constraint: "must lie in (0, 1)",
    })?;
    let q = alpha - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * poly(&PPND_A, r) / poly(&PPND_B, r));
    }
    let mut r = if q < 0.0 { alpha } else { 1.0 - alpha };
    r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        let s = r - 1.6;
        poly(&PPND_C, s) / poly(&PPND_D, s)
    } else {
        let s = r - 5.0;
        poly(&PPND_E, s) / poly(&PPND_F, s)
    };
    Ok(if q < 0.0 { -value } else { value })
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

// --- Cody's erf/erfc (SPECFUN "calerf" rational approximations) -------------

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_6e3,
];
const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];
const INV_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        // erfc = 1 - erf on the central interval
        let z = y * y;
        let num = (((ERF_A[4] * z + ERF_A[0]) * z + ERF_A[1]) * z + ERF_A[2]) * z + ERF_A[3];
        let den = (((z + ERF_B[0]) * z + ERF_B[1]) * z + ERF_B[2]) * z + ERF_B[3];
        return 1.0 - x * num / den;
    } else if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        scaled_exp(y) * (num + ERF_C[7]) / (den + ERF_D[7])
    } else {
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        scaled_exp(y) * (INV_SQRT_PI - r) / y
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// `exp(-y^2)` split so the squared part is computed on a 1/16-grid value,
/// which keeps the argument of each exp exactly representable.
fn scaled_exp(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}
