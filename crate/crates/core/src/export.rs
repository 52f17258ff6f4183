//! CSV and plain-text writers for run products. Output is a pure function of
//! the inputs, so equal runs give byte-identical files.

use std::io::Write;

use crate::analysis::{CorrelationHistogram, FringeResult};
use crate::detection::DetectorRecord;
use crate::emitter::EmissionStream;
use crate::experiment::{DualityOutcome, FringeOutcome, HbtOutcome};

pub type Result<T> = std::io::Result<T>;

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// `emission_ns`, one row per emitted photon.
pub fn write_emissions_csv<W: Write>(w: W, stream: &EmissionStream) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["emission_ns"])?;
    for &t in &stream.times_ns {
        out.write_record([num(t)])?;
    }
    out.flush()?;
    Ok(())
}

/// `detector,click_ns,truth`, grouped by detector in record order. `truth`
/// is empty when the record carries no ground truth.
pub fn write_clicks_csv<W: Write>(w: W, records: &[DetectorRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["detector", "click_ns", "truth"])?;
    for rec in records {
        for (i, &t) in rec.clicks_ns.iter().enumerate() {
            let truth = rec.truth.as_ref().map_or("", |v| v[i].as_str());
            out.write_record([rec.detector_id.as_str(), &num(t), truth])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `tau_ns,counts,g2` with `tau_ns` at bin centers. `g2` is `NaN` when the
/// normalization is undefined.
pub fn write_histogram_csv<W: Write>(w: W, hist: &CorrelationHistogram) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tau_ns", "counts", "g2"])?;
    for (k, &c) in hist.counts.iter().enumerate() {
        let g2 = hist.normalized.as_ref().map_or(f64::NAN, |n| n[k]);
        out.write_record([num(hist.bin_center(k)), c.to_string(), num(g2)])?;
    }
    out.flush()?;
    Ok(())
}

/// `phi_rad,rate_<label>...` in clicks/ns, detector columns sorted by label.
pub fn write_fringe_csv<W: Write>(w: W, fringe: &FringeResult) -> Result<()> {
    let mut order: Vec<usize> = (0..fringe.labels.len()).collect();
    order.sort_by(|&a, &b| fringe.labels[a].cmp(&fringe.labels[b]));

    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["phi_rad".to_string()];
    header.extend(order.iter().map(|&d| format!("rate_{}", fringe.labels[d])));
    out.write_record(&header)?;
    for (i, &phi) in fringe.phis.iter().enumerate() {
        let mut row = vec![num(phi)];
        row.extend(order.iter().map(|&d| num(fringe.rates[d][i])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".into(), |v| format!("{v:.6}"))
}

pub fn fringe_report(outcome: &FringeOutcome) -> String {
    let r = &outcome.result;
    let mut s = String::from("fringe scan\n");
    s += &format!("phase points: {}\n", r.phis.len());
    s += &format!(
        "emissions per point: {}\n",
        outcome
            .emissions_per_point
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let mut order: Vec<usize> = (0..r.labels.len()).collect();
    order.sort_by(|&a, &b| r.labels[a].cmp(&r.labels[b]));
    for d in order {
        s += &format!(
            "{}: max {:.6e} /ns, min {:.6e} /ns, visibility {}",
            r.labels[d],
            r.i_max[d],
            r.i_min[d],
            opt(r.visibility[d])
        );
        match &r.fits[d] {
            Some(f) => {
                s += &format!(
                    ", fitted visibility {:.6}, phase origin {:.6} rad\n",
                    f.visibility, f.phase_origin
                )
            }
            None => s += ", no fit\n",
        }
    }
    s
}

fn hbt_body(h: &HbtOutcome) -> String {
    let hist = &h.histogram;
    let mut s = format!("pair: {} {}\n", h.pair.0, h.pair.1);
    s += &format!("emissions: {}\n", h.emissions);
    for (l, r) in h.labels.iter().zip(&h.rates) {
        s += &format!("rate {l}: {r:.6e} /ns\n");
    }
    s += &format!(
        "bins: {} x {} ns over [-{}, {}) ns\n",
        hist.bins(),
        hist.bin_width_ns,
        hist.max_tau_ns,
        hist.max_tau_ns
    );
    s += &format!("coincidences: {}\n", hist.total_counts());
    s += &format!(
        "zero-delay bin [0, {}) ns: counts {}, g2 {}\n",
        hist.bin_width_ns,
        hist.counts[hist.zero_bin()],
        opt(hist.g2_zero())
    );
    for d in &h.empty_detectors {
        s += &format!("warning: detector {d} recorded no clicks\n");
    }
    s
}

pub fn hbt_report(h: &HbtOutcome) -> String {
    format!("hbt\n{}", hbt_body(h))
}

pub fn duality_report(d: &DualityOutcome) -> String {
    let mut s = String::from("duality check\n");
    s += &format!("phase: {}\n", d.phase);
    s += &format!(
        "suppression {}/{}: {}\n",
        d.suppressed,
        d.reference,
        opt(d.suppression_ratio)
    );
    s += &hbt_body(&d.hbt);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::cross_correlate;

    fn text(f: impl FnOnce(&mut Vec<u8>)) -> String {
        let mut buf = Vec::new();
        f(&mut buf);
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn histogram_layout() {
        let a = DetectorRecord::from_clicks("e", vec![10.0], 100.0);
        let b = DetectorRecord::from_clicks("f", vec![10.5], 100.0);
        let h = cross_correlate(&a, &b, 1.0, 2.0).unwrap();
        let s = text(|buf| write_histogram_csv(buf, &h).unwrap());
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "tau_ns,counts,g2");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "-1.5,0,0");
        assert_eq!(lines[3], "0.5,1,100");
    }

    #[test]
    fn undefined_normalization_is_nan() {
        let a = DetectorRecord::from_clicks("e", vec![], 100.0);
        let b = DetectorRecord::from_clicks("f", vec![1.0], 100.0);
        let h = cross_correlate(&a, &b, 1.0, 1.0).unwrap();
        let s = text(|buf| write_histogram_csv(buf, &h).unwrap());
        assert!(s.lines().skip(1).all(|l| l.ends_with(",NaN")), "{s}");
    }

    #[test]
    fn clicks_and_emissions() {
        let mut rec = DetectorRecord::from_clicks("h", vec![1.25, 2.0], 10.0);
        let s = text(|buf| write_clicks_csv(buf, &[rec.clone()]).unwrap());
        assert_eq!(s, "detector,click_ns,truth\nh,1.25,\nh,2,\n");
        rec.truth = Some(vec![
            crate::detection::ClickSource::Photon,
            crate::detection::ClickSource::Dark,
        ]);
        let s = text(|buf| write_clicks_csv(buf, &[rec]).unwrap());
        assert_eq!(s, "detector,click_ns,truth\nh,1.25,photon\nh,2,dark\n");

        let em = EmissionStream {
            times_ns: vec![0.5, 3.0],
            duration_ns: 4.0,
            seed: 0,
        };
        let s = text(|buf| write_emissions_csv(buf, &em).unwrap());
        assert_eq!(s, "emission_ns\n0.5\n3\n");
    }

    #[test]
    fn fringe_columns_sorted() {
        let r = FringeResult::from_rates(
            vec![0.0, 1.0],
            vec!["g".into(), "e".into()],
            vec![vec![0.1, 0.2], vec![0.3, 0.4]],
        );
        let s = text(|buf| write_fringe_csv(buf, &r).unwrap());
        assert_eq!(s, "phi_rad,rate_e,rate_g\n0,0.3,0.1\n1,0.4,0.2\n");
    }
}
