//! Transition-rate estimates and the chain-length sufficiency check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::series::EdgeSeries;
use super::tables::Table2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub alpha: f64,
    pub beta: f64,
}

/// `alpha = x01 / (x00 + x01)`, `beta = x10 / (x10 + x11)`.
pub fn mcest_table(t: &Table2) -> Result<RateEstimate> {
    let (from0, from1) = (t.row(0), t.row(1));
    if from0 == 0 || from1 == 0 {
        return Err(Error::DegenerateSeries(format!(
            "no transitions out of state {}",
            if from0 == 0 { 0 } else { 1 }
        )));
    }
    Ok(RateEstimate {
        alpha: t.x[0][1] as f64 / from0 as f64,
        beta: t.x[1][0] as f64 / from1 as f64,
    })
}

pub fn mcest(series: &EdgeSeries) -> Result<RateEstimate> {
    if series.is_constant() {
        return Err(Error::DegenerateSeries("constant series".into()));
    }
    mcest_table(&series.table2())
}

/// Standard normal quantile, Wichura's AS 241 (relative accuracy about
/// 1e-16).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

/// Asymptotic variance factor of the sample mean of a stationary two-state
/// chain: `alpha beta (2 - alpha - beta) / (alpha + beta)^3`.
pub fn mean_variance_factor(alpha: f64, beta: f64) -> f64 {
    alpha * beta * (2.0 - alpha - beta) / (alpha + beta).powi(3)
}

/// Length a first-order series with rates `(alpha, beta)` needs so that its
/// mean lies within `r` of the edge mean with probability `s`.
///
/// Rates equal to 1 are accepted since estimates from short thinned series
/// hit that value.
pub fn required_length(alpha: f64, beta: f64, r: f64, s: f64) -> Result<u64> {
    let rate_ok = |x: f64| x > 0.0 && x <= 1.0;
    if !rate_ok(alpha) || !rate_ok(beta) {
        return Err(Error::InvalidInput(format!(
            "rates must lie in (0, 1], got alpha = {alpha}, beta = {beta}"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("tolerance r must be positive, got {r}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidInput(format!("confidence s must lie in (0, 1), got {s}")));
    }
    let z = normal_quantile(0.5 * (1.0 + s));
    let n = mean_variance_factor(alpha, beta) / (r / z).powi(2);
    Ok(n.ceil() as u64)
}
