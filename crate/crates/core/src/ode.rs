//! Dormand–Prince 8(5,3) explicit Runge–Kutta integrator with adaptive steps
//! and seventh-order dense output (Hairer, Nørsett & Wanner, DOP853).

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar type of an ODE state vector.
pub trait OdeScalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;
const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;
const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;
const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;

/// out = y + h Σ cᵢ kᵢ
fn combine<S: OdeScalar>(out: &mut [S], y: &[S], h: f64, terms: &[(f64, &[S])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = S::zero();
        for &(c, k) in terms {
            acc = acc + k[i] * c;
        }
        *o = y[i] + acc * h;
    }
}

/// out = Σ cᵢ kᵢ
fn sum_terms<S: OdeScalar>(out: &mut [S], terms: &[(f64, &[S])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = S::zero();
        for &(c, k) in terms {
            acc = acc + k[i] * c;
        }
        *o = acc;
    }
}

/// Integrate y' = f(t, y) from `t0` and report the solution at each of the
/// ascending times `t_out` (all ≥ t0) through `output(index, t, y)`.
pub fn integrate<S, F, O>(mut f: F, t0: f64, y0: &[S], t_out: &[f64], opts: &OdeOptions, mut output: O) -> Result<OdeStats>
where
    S: OdeScalar,
    F: FnMut(f64, &[S], &mut [S]),
    O: FnMut(usize, f64, &[S]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    if t_out.is_empty() {
        return Ok(stats);
    }
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out[0] < t0 {
        return Err(Error::InvalidArgument("output times must be ascending and >= t0".into()));
    }
    if !(opts.rtol > 0.0) || !(opts.atol >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let t_end = *t_out.last().unwrap();
    let mut next_out = 0;
    while next_out < t_out.len() && t_out[next_out] == t0 {
        output(next_out, t0, y0)?;
        next_out += 1;
    }
    if next_out == t_out.len() {
        return Ok(stats);
    }

    let z = vec![S::zero(); n];
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut k5) = (z.clone(), z.clone(), z.clone(), z.clone(), z.clone());
    let (mut k6, mut k7, mut k8, mut k9, mut k10) = (z.clone(), z.clone(), z.clone(), z.clone(), z.clone());
    let mut y1 = z.clone();
    let mut rc = [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()];
    let mut dense = z.clone();

    let mut t = t0;
    f(t, &y, &mut k1);
    stats.evaluations += 1;
    let sk = |a: S, b: S| opts.atol + opts.rtol * a.magnitude().max(b.magnitude());

    let span = t_end - t0;
    let h_max = opts.h_max.min(span);
    let mut h = match opts.h_init {
        Some(h) => h.min(h_max),
        None => {
            let (mut dnf, mut dny) = (0.0, 0.0);
            for i in 0..n {
                let s = sk(y[i], y[i]);
                dnf += (k1[i].magnitude() / s).powi(2);
                dny += (y[i].magnitude() / s).powi(2);
            }
            let mut h0 = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
            h0 = h0.min(h_max);
            combine(&mut y1, &y, h0, &[(1.0, &k1)]);
            f(t + h0, &y1, &mut k2);
            stats.evaluations += 1;
            let mut der2 = 0.0;
            for i in 0..n {
                der2 += ((k2[i] - k1[i]).magnitude() / sk(y[i], y[i])).powi(2);
            }
            let der2 = der2.sqrt() / h0;
            let der12 = der2.max(dnf.sqrt());
            let h1 = if der12 <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
            (100.0 * h0).min(h1).min(h_max)
        }
    };

    let (fac1, fac2, safe) = (0.333, 6.0, 0.9);
    let mut reject = false;
    let mut err_last = 0.0;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
                error_estimate: err_last,
            });
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                reason: format!("step size {h:e} underflow"),
                error_estimate: err_last,
            });
        }
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }

        combine(&mut y1, &y, h, &[(A21, &k1)]);
        f(t + C2 * h, &y1, &mut k2);
        combine(&mut y1, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &y1, &mut k3);
        combine(&mut y1, &y, h, &[(A41, &k1), (A43, &k3)]);
        f(t + C4 * h, &y1, &mut k4);
        combine(&mut y1, &y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]);
        f(t + C5 * h, &y1, &mut k5);
        combine(&mut y1, &y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]);
        f(t + C6 * h, &y1, &mut k6);
        combine(&mut y1, &y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t + C7 * h, &y1, &mut k7);
        combine(&mut y1, &y, h, &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]);
        f(t + C8 * h, &y1, &mut k8);
        combine(
            &mut y1,
            &y,
            h,
            &[(A91, &k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)],
        );
        f(t + C9 * h, &y1, &mut k9);
        combine(
            &mut y1,
            &y,
            h,
            &[(A101, &k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
        );
        f(t + C10 * h, &y1, &mut k10);
        combine(
            &mut y1,
            &y,
            h,
            &[
                (A111, &k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        );
        f(t + C11 * h, &y1, &mut k2);
        combine(
            &mut y1,
            &y,
            h,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k2),
            ],
        );
        f(t + h, &y1, &mut k3);
        stats.evaluations += 11;
        sum_terms(
            &mut k4,
            &[(B1, &k1), (B6, &k6), (B7, &k7), (B8, &k8), (B9, &k9), (B10, &k10), (B11, &k2), (B12, &k3)],
        );
        combine(&mut k5, &y, h, &[(1.0, &k4)]);

        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..n {
            let s = sk(y[i], k5[i]);
            let e2 = k4[i] - k1[i] * BHH1 - k9[i] * BHH2 - k3[i] * BHH3;
            err2 += (e2.magnitude() / s).powi(2);
            let e1 = k1[i] * ER1
                + k6[i] * ER6
                + k7[i] * ER7
                + k8[i] * ER8
                + k9[i] * ER9
                + k10[i] * ER10
                + k2[i] * ER11
                + k3[i] * ER12;
            err += (e1.magnitude() / s).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (n.max(1) as f64 * deno)).sqrt();
        err_last = err;
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            reject = true;
            continue;
        }
        let fac11 = err.powf(1.0 / 8.0);
        let fac = (fac11 / safe).clamp(1.0 / fac2, 1.0 / fac1);
        let mut h_new = h / fac;

        if err <= 1.0 {
            stats.accepted += 1;
            // k4 ← f(t+h, y_new)
            f(t + h, &k5, &mut k4);
            stats.evaluations += 1;
            let t_new = if last { t_end } else { t + h };

            let need_dense = next_out < t_out.len() && t_out[next_out] <= t_new;
            if need_dense {
                rc[0].copy_from_slice(&y);
                for i in 0..n {
                    let ydiff = k5[i] - y[i];
                    rc[1][i] = ydiff;
                    let bspl = k1[i] * h - ydiff;
                    rc[2][i] = bspl;
                    rc[3][i] = ydiff - k4[i] * h - bspl;
                }
                let base = [
                    [D41, D46, D47, D48, D49, D410, D411, D412],
                    [D51, D56, D57, D58, D59, D510, D511, D512],
                    [D61, D66, D67, D68, D69, D610, D611, D612],
                    [D71, D76, D77, D78, D79, D710, D711, D712],
                ];
                for (r, d) in base.iter().enumerate() {
                    sum_terms(
                        &mut rc[4 + r],
                        &[(d[0], &k1), (d[1], &k6), (d[2], &k7), (d[3], &k8), (d[4], &k9), (d[5], &k10), (d[6], &k2), (d[7], &k3)],
                    );
                }
                combine(
                    &mut y1,
                    &y,
                    h,
                    &[
                        (A141, &k1),
                        (A147, &k7),
                        (A148, &k8),
                        (A149, &k9),
                        (A1410, &k10),
                        (A1411, &k2),
                        (A1412, &k3),
                        (A1413, &k4),
                    ],
                );
                f(t + C14 * h, &y1, &mut k10);
                combine(
                    &mut y1,
                    &y,
                    h,
                    &[
                        (A151, &k1),
                        (A156, &k6),
                        (A157, &k7),
                        (A158, &k8),
                        (A1511, &k2),
                        (A1512, &k3),
                        (A1513, &k4),
                        (A1514, &k10),
                    ],
                );
                f(t + C15 * h, &y1, &mut k2);
                combine(
                    &mut y1,
                    &y,
                    h,
                    &[
                        (A161, &k1),
                        (A166, &k6),
                        (A167, &k7),
                        (A168, &k8),
                        (A169, &k9),
                        (A1613, &k4),
                        (A1614, &k10),
                        (A1615, &k2),
                    ],
                );
                f(t + C16 * h, &y1, &mut k3);
                stats.evaluations += 3;
                let tail = [
                    [D413, D414, D415, D416],
                    [D513, D514, D515, D516],
                    [D613, D614, D615, D616],
                    [D713, D714, D715, D716],
                ];
                for (r, d) in tail.iter().enumerate() {
                    let row = &mut rc[4 + r];
                    for i in 0..n {
                        row[i] = (row[i] + k4[i] * d[0] + k10[i] * d[1] + k2[i] * d[2] + k3[i] * d[3]) * h;
                    }
                }
                while next_out < t_out.len() && t_out[next_out] <= t_new {
                    let to = t_out[next_out];
                    if to == t_new && last {
                        output(next_out, to, &k5)?;
                    } else {
                        let s = (to - t) / h;
                        let s1 = 1.0 - s;
                        for i in 0..n {
                            let conpar = rc[4][i] + (rc[5][i] + (rc[6][i] + rc[7][i] * s) * s1) * s;
                            dense[i] = rc[0][i] + (rc[1][i] + (rc[2][i] + (rc[3][i] + conpar * s1) * s) * s1) * s;
                        }
                        output(next_out, to, &dense)?;
                    }
                    next_out += 1;
                }
            }

            std::mem::swap(&mut k1, &mut k4);
            std::mem::swap(&mut y, &mut k5);
            t = t_new;
            if last || next_out >= t_out.len() {
                return Ok(stats);
            }
            if h_new.abs() > h_max {
                h_new = h_max;
            }
            if reject {
                h_new = h_new.min(h);
            }
            reject = false;
        } else {
            h_new = h / (1.0 / fac1).min(fac11 / safe);
            reject = true;
            stats.rejected += 1;
        }
        h = h_new;
    }
}
