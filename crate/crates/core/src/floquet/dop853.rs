//! Dormand-Prince 8(5,3) explicit Runge-Kutta pair on complex state vectors.
//!
//! Coefficients follow Hairer & Wanner's DOP853. Only the twelve stages of the
//! main formula are used; dense output is not needed here.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub(crate) type State<const D: usize> = [Complex64; D];

pub(crate) const STAGES: usize = 12;

pub(crate) const C: [f64; STAGES] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
];

#[rustfmt::skip]
const A: [[f64; STAGES - 1]; STAGES] = [
    [0.0; 11],
    [5.26001519587677318785587544488E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.41365134159266685502369798665E-1, 0.0, -8.84549479328286085344864962717E-1, 9.24834003261792003115737966543E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7037037037037037037037037037E-2, 0.0, 0.0, 1.70828608729473871279604482173E-1, 1.25467687566822425016691814123E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7109375E-2, 0.0, 0.0, 1.70252211019544039314978060272E-1, 6.02165389804559606850219397283E-2, -1.7578125E-2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.70920001185047927108779319836E-2, 0.0, 0.0, 1.70383925712239993810214054705E-1, 1.07262030446373284651809199168E-1, -1.53194377486244017527936158236E-2, 8.27378916381402288758473766002E-3, 0.0, 0.0, 0.0, 0.0],
    [6.24110958716075717114429577812E-1, 0.0, 0.0, -3.36089262944694129406857109825E0, -8.68219346841726006818189891453E-1, 2.75920996994467083049415600797E1, 2.01540675504778934086186788979E1, -4.34898841810699588477366255144E1, 0.0, 0.0, 0.0],
    [4.77662536438264365890433908527E-1, 0.0, 0.0, -2.48811461997166764192642586468E0, -5.90290826836842996371446475743E-1, 2.12300514481811942347288949897E1, 1.52792336328824235832596922938E1, -3.32882109689848629194453265587E1, -2.03312017085086261358222928593E-2, 0.0, 0.0],
    [-9.3714243008598732571704021658E-1, 0.0, 0.0, 5.18637242884406370830023853209E0, 1.09143734899672957818500254654E0, -8.14978701074692612513997267357E0, -1.85200656599969598641566180701E1, 2.27394870993505042818970056734E1, 2.49360555267965238987089396762E0, -3.0467644718982195003823669022E0, 0.0],
    [2.27331014751653820792359768449E0, 0.0, 0.0, -1.05344954667372501984066689879E1, -2.00087205822486249909675718444E0, -1.79589318631187989172765950534E1, 2.79488845294199600508499808837E1, -2.85899827713502369474065508674E0, -8.87285693353062954433549289258E0, 1.23605671757943030647266201528E1, 6.43392746015763530355970484046E-1],
];

const B: [f64; STAGES] = [
    5.42937341165687622380535766363E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566E0,
    1.89151789931450038304281599044E0,
    -5.8012039600105847814672114227E0,
    3.1116436695781989440891606237E-1,
    -1.52160949662516078556178806805E-1,
    2.01365400804030348374776537501E-1,
    4.47106157277725905176885569043E-2,
];

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER: [f64; STAGES] = [
    0.1312004499419488073250102996E-01,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753E+01,
    -0.4957589496572501915214079952E+00,
    0.1664377182454986536961530415E+01,
    -0.3503288487499736816886487290E+00,
    0.3341791187130174790297318841E+00,
    0.8192320648511571246570742613E-01,
    -0.2235530786388629525884427845E-01,
];

/// One step of the eighth-order formula. `k1 = f(x, y)` is supplied by the
/// caller; `f(stage, x, y)` evaluates the right-hand side. Returns the new
/// state and the fifth- and eighth-order error estimates (unscaled by `h`).
pub(crate) fn step<const D: usize, F>(
    f: &mut F,
    x: f64,
    h: f64,
    y: &State<D>,
    k1: &State<D>,
) -> Result<(State<D>, State<D>, State<D>)>
where
    F: FnMut(usize, f64, &State<D>) -> Result<State<D>>,
{
    let zero = Complex64::new(0.0, 0.0);
    let mut k = [[zero; D]; STAGES];
    k[0] = *k1;
    for s in 1..STAGES {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                let ha = h * a;
                for i in 0..D {
                    ys[i] += ha * kj[i];
                }
            }
        }
        k[s] = f(s, x + C[s] * h, &ys)?;
    }
    let mut y_new = *y;
    let mut err5 = [zero; D];
    let mut err8 = [zero; D];
    for i in 0..D {
        let mut incr = zero;
        let mut e8 = zero;
        for s in 0..STAGES {
            incr += B[s] * k[s][i];
            e8 += ER[s] * k[s][i];
        }
        y_new[i] += h * incr;
        err5[i] = incr - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
        err8[i] = e8;
    }
    Ok((y_new, err5, err8))
}

/// Tolerances and limits of the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Control {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

fn weighted_norms<const D: usize>(
    y: &State<D>,
    y_new: &State<D>,
    err5: &State<D>,
    err8: &State<D>,
    ctl: &Control,
) -> (f64, f64) {
    let (mut e5, mut e8) = (0.0, 0.0);
    for i in 0..D {
        let sk = ctl.abs_tol + ctl.rel_tol * y[i].norm().max(y_new[i].norm());
        e5 += (err5[i].norm() / sk).powi(2);
        e8 += (err8[i].norm() / sk).powi(2);
    }
    (e5, e8)
}

fn initial_step<const D: usize, F>(
    f: &mut F,
    x: f64,
    y: &State<D>,
    k1: &State<D>,
    h_max: f64,
    ctl: &Control,
) -> Result<f64>
where
    F: FnMut(usize, f64, &State<D>) -> Result<State<D>>,
{
    let norm = |v: &State<D>| {
        let mut s = 0.0;
        for i in 0..D {
            let sk = ctl.abs_tol + ctl.rel_tol * y[i].norm();
            s += (v[i].norm() / sk).powi(2);
        }
        (s / D as f64).sqrt()
    };
    let (dnf, dny) = (norm(k1), norm(y));
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(h_max);
    let mut y1 = *y;
    for i in 0..D {
        y1[i] += h * k1[i];
    }
    let k2 = f(0, x + h, &y1)?;
    let mut diff = [Complex64::new(0.0, 0.0); D];
    for i in 0..D {
        diff[i] = k2[i] - k1[i];
    }
    let der2 = norm(&diff) / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (1e-6f64).max(h * 1e-3) } else { (0.01 / der12).powf(1.0 / 8.0) };
    Ok((100.0 * h).min(h1).min(h_max))
}

/// Integrate from `x0` to `x1 > x0` with error control.
pub(crate) fn integrate_adaptive<const D: usize, F>(
    mut f: F,
    y0: State<D>,
    x0: f64,
    x1: f64,
    ctl: &Control,
) -> Result<(State<D>, Stats)>
where
    F: FnMut(usize, f64, &State<D>) -> Result<State<D>>,
{
    const SAFE: f64 = 0.9;
    const FACC1: f64 = 1.0 / 0.333;
    const FACC2: f64 = 1.0 / 6.0;
    const EXPO1: f64 = 1.0 / 8.0;
    let h_max = x1 - x0;
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(0, x, &y)?;
    let mut h = initial_step(&mut f, x, &y, &k1, h_max, ctl)?;
    let mut stats = Stats::default();
    let mut last_rejected = false;
    loop {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::StepLimitExceeded { max_steps: ctl.max_steps });
        }
        if h <= 1e-14 * x.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { x });
        }
        let last = x + h >= x1;
        if last {
            h = x1 - x;
        }
        let (y_new, err5, err8) = step(&mut f, x, h, &y, &k1)?;
        let (e5, e8) = weighted_norms(&y, &y_new, &err5, &err8, ctl);
        let deno = e8 + 0.01 * e5;
        let deno = if deno <= 0.0 { 1.0 } else { deno };
        let err = h * e8 * (1.0 / (deno * D as f64)).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            stats.rejected += 1;
            continue;
        }
        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / SAFE).clamp(FACC2, FACC1);
        let mut h_new = h / fac;
        if err <= 1.0 {
            stats.accepted += 1;
            x = if last { x1 } else { x + h };
            y = y_new;
            if last {
                return Ok((y, stats));
            }
            k1 = f(0, x, &y)?;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= FACC1.min(fac11 / SAFE);
        }
    }
}

/// Integrate over `[0, steps * h]` with a fixed step. `f(n, s, y)` evaluates
/// the right-hand side at stage `s` of step `n`.
pub(crate) fn integrate_fixed<const D: usize, F>(
    mut f: F,
    y0: State<D>,
    steps: usize,
    h: f64,
) -> State<D>
where
    F: FnMut(usize, usize, &State<D>) -> State<D>,
{
    let mut y = y0;
    for n in 0..steps {
        let x = n as f64 * h;
        let k1 = f(n, 0, &y);
        let mut stage = |s: usize, _x: f64, ys: &State<D>| Ok(f(n, s, ys));
        let (y_new, _, _) = step(&mut stage, x, h, &y, &k1).expect("infallible right-hand side");
        y = y_new;
    }
    y
}
