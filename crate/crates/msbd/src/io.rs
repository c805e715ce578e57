//! File formats: the MSBD1 instance/recovery container, trace and grid CSVs,
//! and binary PGM image export. All writes are atomic (temp file + rename).
//!
//! MSBD1 container layout:
//!   bytes 0..5   magic "MSBD1"
//!   bytes 5..9   little-endian u32: JSON header length L
//!   bytes 9..9+L JSON header (see [`Header`])
//!   payload      little-endian f64 arrays, in header-documented order;
//!                complex arrays interleave re/im
//!
//! Instance payload order: f, then the N channels, then the N observations.
//! Recovery payload order: f_hat, then the N recovered channels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::Lattice;
use crate::optimize::Trace;
use crate::recovery::RecoveryResult;
use crate::scalar::{Field, Scalar};
use crate::synth::{GroundTruth, NoiseSpec, Observations};

pub const MAGIC: &[u8; 5] = b"MSBD1";

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Header {
    pub kind: String,
    pub dims: Vec<usize>,
    pub channels: usize,
    pub theta: f64,
    pub field: Field,
    pub seed: u64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Echo of the generating configuration, for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// Writes `bytes` to `path` atomically: a temp sibling is written, synced,
/// and renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.flush()?;
        f.get_ref().sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn push_array<S: Scalar>(out: &mut Vec<u8>, data: &[S]) {
    for v in data {
        let z = v.to_complex();
        out.extend_from_slice(&z.re.to_le_bytes());
        if S::FIELD == Field::Complex {
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
}

fn read_array<S: Scalar>(bytes: &[u8], offset: &mut usize, len: usize) -> Result<Vec<S>> {
    let per = if S::FIELD == Field::Complex { 16 } else { 8 };
    let need = len * per;
    if *offset + need > bytes.len() {
        return Err(Error::Format(format!(
            "payload truncated: need {need} bytes at offset {offset}, have {}",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(len);
    let mut take = || {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&bytes[*offset..*offset + 8]);
        *offset += 8;
        f64::from_le_bytes(buf)
    };
    for _ in 0..len {
        let re = take();
        let im = if S::FIELD == Field::Complex { take() } else { 0.0 };
        out.push(S::from_complex(Complex64::new(re, im)));
    }
    Ok(out)
}

fn container_bytes(header: &Header, payload: &[u8]) -> Result<Vec<u8>> {
    let header_json = serde_json::to_vec(header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(9 + header_json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(payload);
    Ok(out)
}

fn split_container(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(Error::Format("missing MSBD1 magic".into()));
    }
    let mut len_buf = [0u8; 4];
    len_buf.copy_from_slice(&bytes[5..9]);
    let hlen = u32::from_le_bytes(len_buf) as usize;
    if 9 + hlen > bytes.len() {
        return Err(Error::Format("header length exceeds file size".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[9..9 + hlen])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    Ok((header, &bytes[9 + hlen..]))
}

/// A ground-truth instance together with its observations, as stored on
/// disk. The field is a runtime property of the file.
#[derive(Debug)]
pub enum LoadedInstance {
    Real(InstanceData<f64>),
    Complex(InstanceData<Complex64>),
}

#[derive(Debug)]
pub struct InstanceData<S: Scalar> {
    pub gt: GroundTruth<S>,
    pub obs: Observations<S>,
    pub noise: NoiseSpec,
    pub header: Header,
}

pub fn instance_to_bytes<S: Scalar>(
    gt: &GroundTruth<S>,
    obs: &Observations<S>,
    noise: &NoiseSpec,
    config: Option<serde_json::Value>,
) -> Result<Vec<u8>> {
    let header = Header {
        kind: "instance".into(),
        dims: gt.lat.dims().to_vec(),
        channels: gt.channels.len(),
        theta: gt.theta,
        field: S::FIELD,
        seed: gt.seed,
        sigma: noise.sigma,
        kappa: gt.realized_kappa,
        config,
    };
    let mut payload = Vec::new();
    push_array(&mut payload, &gt.f);
    for x in &gt.channels {
        push_array(&mut payload, x);
    }
    for y in &obs.y {
        push_array(&mut payload, y);
    }
    container_bytes(&header, &payload)
}

pub fn write_instance<S: Scalar>(
    path: &Path,
    gt: &GroundTruth<S>,
    obs: &Observations<S>,
    noise: &NoiseSpec,
    config: Option<serde_json::Value>,
) -> Result<()> {
    write_atomic(path, &instance_to_bytes(gt, obs, noise, config)?)
}

fn instance_from_parts<S: Scalar>(header: Header, payload: &[u8]) -> Result<InstanceData<S>> {
    let lat = Lattice::from_dims(&header.dims)?;
    let n = lat.n();
    let mut offset = 0usize;
    let f = read_array::<S>(payload, &mut offset, n)?;
    let mut channels = Vec::with_capacity(header.channels);
    for _ in 0..header.channels {
        channels.push(read_array::<S>(payload, &mut offset, n)?);
    }
    let mut y = Vec::with_capacity(header.channels);
    for _ in 0..header.channels {
        y.push(read_array::<S>(payload, &mut offset, n)?);
    }
    if offset != payload.len() {
        return Err(Error::Format(format!(
            "trailing payload bytes: consumed {offset}, file has {}",
            payload.len()
        )));
    }
    Ok(InstanceData {
        gt: GroundTruth {
            f,
            channels,
            lat: lat.clone(),
            theta: header.theta,
            seed: header.seed,
            realized_kappa: header.kappa,
        },
        obs: Observations {
            y,
            lat,
            theta_hint: header.theta,
        },
        noise: NoiseSpec { sigma: header.sigma },
        header,
    })
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let (header, payload) = split_container(&bytes)?;
    if header.kind != "instance" {
        return Err(Error::Format(format!("expected an instance file, got kind `{}`", header.kind)));
    }
    match header.field {
        Field::Real => Ok(LoadedInstance::Real(instance_from_parts(header, payload)?)),
        Field::Complex => Ok(LoadedInstance::Complex(instance_from_parts(header, payload)?)),
    }
}

/// Recovery output mirrors the instance container with kind "recovery" and
/// payload f_hat followed by the recovered channels.
pub fn write_recovery<S: Scalar>(
    path: &Path,
    rec: &RecoveryResult<S>,
    theta: f64,
    seed: u64,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let header = Header {
        kind: "recovery".into(),
        dims: rec.lat.dims().to_vec(),
        channels: rec.x_hat.len(),
        theta,
        field: S::FIELD,
        seed,
        sigma: 0.0,
        kappa: None,
        config,
    };
    let mut payload = Vec::new();
    push_array(&mut payload, &rec.f_hat);
    for x in &rec.x_hat {
        push_array(&mut payload, x);
    }
    write_atomic(path, &container_bytes(&header, &payload)?)
}

/// Trace CSV: `t,objective,grad_norm,perturbed,accuracy`, accuracy empty
/// when no ground truth was available.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::from("t,objective,grad_norm,perturbed,accuracy\n");
    for r in &trace.records {
        let acc = r.accuracy.map(|a| format!("{a:.17e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{},{}\n",
            r.t,
            r.objective,
            r.grad_norm,
            u8::from(r.perturbed),
            acc
        ));
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    write_atomic(path, trace_to_csv(trace).as_bytes())
}

/// One phase-grid cell outcome.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GridCell {
    pub axis1: f64,
    pub axis2: f64,
    pub trials: usize,
    pub successes: usize,
    pub mean_accuracy: f64,
    pub mean_seconds: f64,
}

pub fn grid_to_csv(cells: &[GridCell]) -> String {
    let mut out = String::from("axis1,axis2,trials,successes,mean_accuracy,mean_seconds\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            c.axis1, c.axis2, c.trials, c.successes, c.mean_accuracy, c.mean_seconds
        ));
    }
    out
}

pub fn write_grid_csv(path: &Path, cells: &[GridCell]) -> Result<()> {
    write_atomic(path, grid_to_csv(cells).as_bytes())
}

/// 8-bit binary PGM (P5), min-max normalized.
pub fn pgm_bytes(data: &[f64], lat: &Lattice) -> Result<Vec<u8>> {
    let dims = lat.dims();
    let (rows, cols) = match dims {
        [n] => (1usize, *n),
        [r, c] => (*r, *c),
        _ => return Err(Error::invalid("lattice", "PGM export needs 1-D or 2-D")),
    };
    lat.check_len(data.len())?;
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for v in data {
        out.push((255.0 * (v - min) / span).round().clamp(0.0, 255.0) as u8);
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, data: &[f64], lat: &Lattice) -> Result<()> {
    write_atomic(path, &pgm_bytes(data, lat)?)
}

/// Sidecar metadata: `<output>.meta.json` with the effective configuration.
pub fn write_meta_json(path: &Path, config: &serde_json::Value) -> Result<()> {
    let meta_path = path.with_extension(format!(
        "{}.meta.json",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let body = serde_json::to_vec_pretty(config).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&meta_path, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::TraceRecord;
    use crate::synth::observe;

    #[test]
    fn instance_roundtrip_is_bit_exact() {
        let lat = Lattice::line(16).unwrap();
        let gt = GroundTruth::gaussian_bernoulli(&lat, 3, 0.2, 42).unwrap();
        let noise = NoiseSpec::new(0.05).unwrap();
        let obs = observe(&gt, &noise, 42).unwrap();
        let dir = std::env::temp_dir().join("msbd_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.msbd");
        write_instance(&path, &gt, &obs, &noise, None).unwrap();
        match load_instance(&path).unwrap() {
            LoadedInstance::Real(data) => {
                assert_eq!(data.gt.f, gt.f);
                assert_eq!(data.gt.channels, gt.channels);
                assert_eq!(data.obs.y, obs.y);
                assert_eq!(data.noise.sigma, 0.05);
                assert_eq!(data.header.seed, 42);
            }
            LoadedInstance::Complex(_) => panic!("wrong field"),
        }
        // byte-identical on re-serialization
        let b1 = instance_to_bytes(&gt, &obs, &noise, None).unwrap();
        let b2 = instance_to_bytes(&gt, &obs, &noise, None).unwrap();
        assert_eq!(b1, b2);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn complex_instance_roundtrip() {
        let lat = Lattice::line(12).unwrap();
        let gt = GroundTruth::complex_joint_sparse(&lat, 2, 3, 8).unwrap();
        let obs = observe(&gt, &NoiseSpec::none(), 8).unwrap();
        let dir = std::env::temp_dir().join("msbd_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("complex.msbd");
        write_instance(&path, &gt, &obs, &NoiseSpec::none(), None).unwrap();
        match load_instance(&path).unwrap() {
            LoadedInstance::Complex(data) => {
                assert_eq!(data.gt.f, gt.f);
                assert_eq!(data.obs.y, obs.y);
            }
            LoadedInstance::Real(_) => panic!("wrong field"),
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let err = split_container(b"NOTMAGIC fake").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn trace_csv_format() {
        let trace = Trace {
            records: vec![
                TraceRecord {
                    t: 0,
                    objective: -1.5,
                    grad_norm: 0.25,
                    perturbed: false,
                    accuracy: Some(0.5),
                },
                TraceRecord {
                    t: 1,
                    objective: -2.0,
                    grad_norm: 0.125,
                    perturbed: true,
                    accuracy: None,
                },
            ],
        };
        let csv = trace_to_csv(&trace);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,objective,grad_norm,perturbed,accuracy");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "0");
        assert_eq!(row[3], "0");
        assert!(row[4].starts_with("5."));
        let row2: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row2[3], "1");
        assert_eq!(row2[4], "");
    }

    #[test]
    fn grid_csv_empty_has_header() {
        let csv = grid_to_csv(&[]);
        assert_eq!(csv, "axis1,axis2,trials,successes,mean_accuracy,mean_seconds\n");
    }

    #[test]
    fn pgm_shape_and_range() {
        let lat = Lattice::grid(2, 3).unwrap();
        let img = pgm_bytes(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &lat).unwrap();
        let text = String::from_utf8_lossy(&img[..9]);
        assert!(text.starts_with("P5\n3 2\n"));
        assert_eq!(*img.last().unwrap(), 255u8);
        assert_eq!(img[img.len() - 6], 0u8);
    }
}
