//! Trajectory export.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic     [u8; 4]  = b"CBEF"
//! version   u32      = 1
//! n         u64
//! k         u64
//! beta      f64
//! sigma     u64      0 = real, 1 = imaginary
//! mesh_len  u64
//! theta, psi, phi, re_logphistar, im_logphistar: mesh_len f64 each
//! ```

use num_complex::Complex64;
use std::io::{Read, Write};

use super::{FieldTrajectory, Sigma};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CBEF";
const VERSION: u32 = 1;

pub fn write_csv<W: Write>(traj: &FieldTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "psi", "phi", "re_logphistar", "im_logphistar"])?;
    for i in 0..traj.len() {
        let l = traj.logphi_star[i];
        w.serialize((traj.theta[i], traj.psi[i], traj.phi[i], l.re, l.im))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(traj: &FieldTrajectory, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(traj.n as u64).to_le_bytes())?;
    out.write_all(&(traj.k as u64).to_le_bytes())?;
    out.write_all(&traj.beta.to_le_bytes())?;
    let s: u64 = match traj.sigma {
        Sigma::Real => 0,
        Sigma::Imaginary => 1,
    };
    out.write_all(&s.to_le_bytes())?;
    out.write_all(&(traj.len() as u64).to_le_bytes())?;
    let mut put = |v: &mut dyn Iterator<Item = f64>| -> std::io::Result<()> {
        for x in v {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    put(&mut traj.theta.iter().copied())?;
    put(&mut traj.psi.iter().copied())?;
    put(&mut traj.phi.iter().copied())?;
    put(&mut traj.logphi_star.iter().map(|c| c.re))?;
    put(&mut traj.logphi_star.iter().map(|c| c.im))?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * len];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Read a dump written by [`write_binary`]. Snapshots and the relative
/// phase are not part of the format.
pub fn read_binary<R: Read>(mut r: R) -> Result<FieldTrajectory> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Numerical("not a trajectory dump".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != VERSION {
        return Err(Error::Numerical("unsupported dump version".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let k = read_u64(&mut r)? as usize;
    let beta = f64::from_bits(read_u64(&mut r)?);
    let sigma = match read_u64(&mut r)? {
        0 => Sigma::Real,
        _ => Sigma::Imaginary,
    };
    let len = read_u64(&mut r)? as usize;
    let theta = read_f64s(&mut r, len)?;
    let psi = read_f64s(&mut r, len)?;
    let phi = read_f64s(&mut r, len)?;
    let re = read_f64s(&mut r, len)?;
    let im = read_f64s(&mut r, len)?;
    Ok(FieldTrajectory {
        n,
        k,
        beta,
        sigma,
        theta,
        psi,
        phi,
        logphi_star: re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect(),
        rel_psi: None,
        snapshots: Default::default(),
    })
}
