//! Slow, obviously-correct reference computations shared by the test suites.

/// The 20 features in library order.
pub fn hrv_features(intervals: &[f64]) -> [f64; 20] {
    let n = intervals.len();
    let nf = n as f64;
    let mut sum = 0.0;
    for &v in intervals {
        sum += v;
    }
    let mean = sum / nf;
    let mut ss = 0.0;
    for &v in intervals {
        ss += (v - mean).powi(2);
    }
    let sdnn = (ss / (nf - 1.0)).sqrt();

    let mut d = Vec::new();
    for i in 0..n - 1 {
        d.push(intervals[i + 1] - intervals[i]);
    }
    let m = d.len() as f64;
    let dmean = d.iter().sum::<f64>() / m;
    let sdsd = (d.iter().map(|x| (x - dmean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let rmssd = (d.iter().map(|x| x * x).sum::<f64>() / m).sqrt();
    let mut nn50 = 0.0;
    let mut nn20 = 0.0;
    for x in &d {
        if x.abs() > 50.0 {
            nn50 += 1.0;
        }
        if x.abs() > 20.0 {
            nn20 += 1.0;
        }
    }

    // insertion sort for the median
    let mut s = intervals.to_vec();
    for i in 1..s.len() {
        let mut j = i;
        while j > 0 && s[j - 1] > s[j] {
            s.swap(j - 1, j);
            j -= 1;
        }
    }
    let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
    let range = s[n - 1] - s[0];

    let hr: Vec<f64> = intervals.iter().map(|v| 60000.0 / v).collect();
    let hr_mean = hr.iter().sum::<f64>() / nf;
    let std_hr = (hr.iter().map(|h| (h - hr_mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let max_hr = hr.iter().cloned().fold(f64::MIN, f64::max);
    let min_hr = hr.iter().cloned().fold(f64::MAX, f64::min);

    let (lf, hf) = hrv_bands(intervals);
    let ratio = if hf > 0.0 { lf / hf } else { 0.0 };

    let sd1 = sdsd / 2f64.sqrt();
    let sd2 = (2.0 * sdnn * sdnn - sd1 * sd1).max(0.0).sqrt();

    [
        mean,
        sdnn,
        sdsd,
        nn50 / m * 100.0,
        nn20 / m * 100.0,
        nn50,
        nn20,
        rmssd,
        median,
        range,
        rmssd / mean,
        sdnn / mean,
        max_hr,
        min_hr,
        std_hr,
        lf,
        hf,
        ratio,
        sd1,
        sd2,
    ]
}

/// 4 Hz linear resample, mean removal, Hann-windowed direct DFT periodograms
/// averaged over half-overlapping 64-sample segments.
pub fn hrv_bands(intervals: &[f64]) -> (f64, f64) {
    let mut onsets = vec![0.0];
    for v in &intervals[..intervals.len() - 1] {
        onsets.push(onsets.last().unwrap() + v / 1000.0);
    }
    let fs = 4.0;
    let last = *onsets.last().unwrap();
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 / fs;
        if t > last + 1e-9 / fs {
            break;
        }
        let mut val = intervals[intervals.len() - 1];
        for j in 0..onsets.len() - 1 {
            if t >= onsets[j] && t < onsets[j + 1] {
                let w = (t - onsets[j]) / (onsets[j + 1] - onsets[j]);
                val = intervals[j] * (1.0 - w) + intervals[j + 1] * w;
                break;
            }
        }
        grid.push(val);
        k += 1;
    }
    let gm = grid.iter().sum::<f64>() / grid.len() as f64;
    let x: Vec<f64> = grid.iter().map(|v| v - gm).collect();

    let l = 64.min(x.len());
    let w: Vec<f64> = (0..l)
        .map(|i| (std::f64::consts::PI * i as f64 / l as f64).sin().powi(2))
        .collect();
    let u: f64 = w.iter().map(|a| a * a).sum();
    let df = fs / l as f64;
    let mut acc = vec![0.0; l / 2 + 1];
    let mut segs = 0.0;
    let mut start = 0;
    while start + l <= x.len() {
        for (b, a) in acc.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..l {
                let ang = -2.0 * std::f64::consts::PI * (b * i) as f64 / l as f64;
                re += x[start + i] * w[i] * ang.cos();
                im += x[start + i] * w[i] * ang.sin();
            }
            let one_sided = if b == 0 || 2 * b == l { 1.0 } else { 2.0 };
            *a += one_sided * (re * re + im * im) / (fs * u);
        }
        segs += 1.0;
        start += (l / 2).max(1);
    }
    let (mut lf, mut hf) = (0.0, 0.0);
    for (b, a) in acc.iter().enumerate() {
        let f = b as f64 * df;
        let p = a / segs * df;
        if (0.04..0.15).contains(&f) {
            lf += p;
        }
        if (0.15..=0.4).contains(&f) {
            hf += p;
        }
    }
    (lf, hf)
}

/// Box-constrained dual maximised by exact coordinate ascent for a fixed
/// multiplier λ of the equality constraint, then minimised over λ by ternary
/// search: D* = min_λ max_{0<=α<=C} Σα − ½αᵀQα − λ yᵀα.
pub fn svm_dual_optimum(k: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let inner = |lambda: f64| -> f64 {
        let mut a = vec![0.0; n];
        for _ in 0..20_000 {
            let mut change = 0.0f64;
            for i in 0..n {
                let qa: f64 = (0..n).map(|j| y[i] * y[j] * k[i][j] * a[j]).sum();
                let step = (1.0 - lambda * y[i] - qa) / k[i][i];
                let new = (a[i] + step).clamp(0.0, c);
                change = change.max((new - a[i]).abs());
                a[i] = new;
            }
            if change < 1e-14 {
                break;
            }
        }
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
            }
        }
        let ya: f64 = (0..n).map(|i| y[i] * a[i]).sum();
        a.iter().sum::<f64>() - 0.5 * quad - lambda * ya
    };
    let (mut lo, mut hi) = (-100.0, 100.0);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if inner(m1) < inner(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    inner(0.5 * (lo + hi))
}
