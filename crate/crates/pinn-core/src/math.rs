//! Double-precision special functions used by activations and the oracle.
//!
//! `erf` is evaluated from Chebyshev fits of erf(w)/w (small arguments) and
//! of the scaled complement erfc(w)·e^{w²} (three larger-argument panels),
//! giving relative error within a few ulp over the whole real line. The
//! polynomial form keeps the hot batched-training path free of libc calls
//! except for a single `exp`.

/// 1/√(2π), the standard normal density at zero.
pub const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

const ERF_SMALL: [f64; 10] = [
    -1.462091340945175e-07,
    1.637123442577e-06,
    -1.4923003368152099e-05,
    0.00012055286202005714,
    -0.0008548326510724796,
    0.0052239776220169365,
    -0.02686617064499972,
    0.1128379167095487,
    -0.3761263890318375,
    1.1283791670955126,
];

const ERFCX_A: [f64; 20] = [
    -8.849955003240408e-10,
    2.4421934547890077e-08,
    -3.233692961004528e-07,
    2.7458922174422307e-06,
    -1.68873243792403e-05,
    8.069327694063132e-05,
    -0.00031452771498895947,
    0.0010389673107326586,
    -0.0030030977554734678,
    0.007802367540664107,
    -0.018605167158241058,
    0.04127744570775862,
    -0.08572313496224296,
    0.16653809618160967,
    -0.3008482175305603,
    0.4999831221608145,
    -0.7522487571480225,
    0.9999993277956696,
    -1.1283790968326848,
    0.9999999965483501,
];

const ERFCX_B: [f64; 20] = [
    -3.32463503923892e-13,
    2.061519878857828e-11,
    -6.081152469968011e-10,
    1.1356641979993959e-08,
    -1.5075483118766653e-07,
    1.5142376903662841e-06,
    -1.1963416922058386e-05,
    7.631597305636442e-05,
    -0.0004005088262614709,
    0.0017537901148022216,
    -0.006480082667402999,
    0.020394688096785445,
    -0.05513615153373714,
    0.12902984284533808,
    -0.263153376565161,
    0.4698229148110391,
    -0.7338128366519077,
    0.9919282127593276,
    -1.1261288137358405,
    0.999700142769498,
];

const ERFCX_C: [f64; 18] = [
    -1.0948422351194793e-14,
    1.010536920543257e-12,
    -4.407517361738904e-11,
    1.2074631841813802e-09,
    -2.3294466779615358e-08,
    3.362742243484141e-07,
    -3.767516390195012e-06,
    3.3532159728398026e-05,
    -0.00024069778673637562,
    0.00140666499155497,
    -0.006727708781566083,
    0.02637675732819257,
    -0.08464201074530389,
    0.22125183668615103,
    -0.46706676053648327,
    0.7848744956847853,
    -1.0227656675232262,
    0.9748164115472182,
];

#[inline(always)]
fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc.mul_add(x, c))
}

/// Error function erf(x) = (2/√π) ∫₀ˣ e^{−s²} ds.
#[inline(always)]
pub fn erf(x: f64) -> f64 {
    let w = x.abs();
    if w * w <= 0.25 {
        return x * horner(&ERF_SMALL, x * x);
    }
    let tail = if w <= 2.0 {
        horner(&ERFCX_A, w)
    } else if w <= 4.0 {
        horner(&ERFCX_B, w)
    } else if w <= 6.1 {
        horner(&ERFCX_C, w)
    } else {
        return 1.0f64.copysign(x);
    };
    (1.0 - tail * (-w * w).exp()).copysign(x)
}

/// Standard normal CDF Φ(z) and density ϕ(z), sharing one exponential.
///
/// Φ(z) = ½(1 + erf(z/√2)), ϕ(z) = e^{−z²/2}/√(2π); the e^{−w²} factor of
/// the large-argument erf branches is exactly the density's exponential.
#[inline(always)]
pub fn normal_cdf_pdf(z: f64) -> (f64, f64) {
    let w = z.abs() * std::f64::consts::FRAC_1_SQRT_2;
    if w > 27.0 {
        return (if z > 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let e = (-w * w).exp();
    let pdf = FRAC_1_SQRT_2PI * e;
    let cdf = if w * w <= 0.25 {
        0.5 + 0.5 * z * std::f64::consts::FRAC_1_SQRT_2 * horner(&ERF_SMALL, w * w)
    } else {
        let tail = if w <= 2.0 {
            horner(&ERFCX_A, w)
        } else if w <= 4.0 {
            horner(&ERFCX_B, w)
        } else if w <= 6.1 {
            horner(&ERFCX_C, w)
        } else {
            0.0
        };
        let half_erfc = 0.5 * tail * e;
        if z > 0.0 {
            1.0 - half_erfc
        } else {
            half_erfc
        }
    };
    (cdf, pdf)
}

/// Numerically stable log(1 + e^x).
#[inline(always)]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function 1/(1 + e^{−x}), overflow-safe on both tails.
#[inline(always)]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Whether this CPU has AVX2 and hardware fused multiply-add.
///
/// Hot loops are compiled twice, once against the portable baseline and once
/// with these features enabled, and pick a version at run time. Results are
/// identical either way: `mul_add` is correctly rounded on both paths, and
/// plain multiply-add expressions are never contracted.
#[cfg(target_arch = "x86_64")]
pub(crate) fn fma_available() -> bool {
    static FLAG: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *FLAG.get_or_init(|| {
        std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
    })
}
