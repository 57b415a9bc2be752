//! Extended-XYZ reader/writer for training frames.

use super::{atomic_number, symbol, Configuration};
use crate::error::{AceError, Result};
use nalgebra::{Matrix3, Vector3};
use std::fmt::Write as _;
use std::path::Path;

pub fn load_training_set(path: impl AsRef<Path>) -> Result<Vec<Configuration>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AceError::io(path, e))?;
    read_xyz(&text)
}

/// Splits the comment line into `key=value` pairs; values may be double-quoted.
fn comment_pairs(line: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        let mut val = String::new();
        if chars.peek() == Some(&'=') {
            chars.next();
            if chars.peek() == Some(&'"') {
                chars.next();
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    val.push(c);
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    val.push(c);
                    chars.next();
                }
            }
        }
        out.push((key.to_ascii_lowercase(), val));
    }
    out
}

fn floats(s: &str, frame: usize, what: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| AceError::Parse {
                frame,
                msg: format!("bad number {t:?} in {what}"),
            })
        })
        .collect()
}

fn matrix9(v: &[f64], frame: usize, what: &str) -> Result<Matrix3<f64>> {
    if v.len() != 9 {
        return Err(AceError::Parse {
            frame,
            msg: format!("{what} needs 9 numbers, got {}", v.len()),
        });
    }
    Ok(Matrix3::from_row_slice(v))
}

pub fn read_xyz(text: &str) -> Result<Vec<Configuration>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let frame = frames.len();
        let err = |msg: String| AceError::Parse { frame, msg };
        let nat: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| err(format!("expected atom count, found {:?}", lines[i])))?;
        let comment = lines
            .get(i + 1)
            .ok_or_else(|| err("missing comment line".into()))?;
        if i + 2 + nat > lines.len() {
            return Err(err(format!(
                "expected {nat} atom lines, file ends after {}",
                lines.len().saturating_sub(i + 2)
            )));
        }
        let mut config = Configuration::cluster(Vec::with_capacity(nat), Vec::with_capacity(nat));
        for (k, v) in comment_pairs(comment) {
            match k.as_str() {
                "energy" => {
                    config.energy = Some(
                        v.parse()
                            .map_err(|_| err(format!("bad energy {v:?}")))?,
                    )
                }
                "lattice" => config.cell = Some(matrix9(&floats(&v, frame, "Lattice")?, frame, "Lattice")?),
                "pbc" => {
                    let f: Vec<bool> = v
                        .split_whitespace()
                        .map(|t| matches!(t, "T" | "t" | "True" | "true" | "1"))
                        .collect();
                    if f.len() != 3 {
                        return Err(err(format!("pbc needs 3 flags, got {v:?}")));
                    }
                    config.periodic = [f[0], f[1], f[2]];
                }
                "virial" => config.virial = Some(matrix9(&floats(&v, frame, "virial")?, frame, "virial")?),
                _ => {}
            }
        }
        if config.cell.is_some() && !comment.to_ascii_lowercase().contains("pbc=") {
            config.periodic = [true; 3];
        }
        let mut forces = Vec::new();
        for a in 0..nat {
            let toks: Vec<&str> = lines[i + 2 + a].split_whitespace().collect();
            if toks.len() < 4 {
                return Err(err(format!("atom line {} has {} columns", a + 1, toks.len())));
            }
            let z = atomic_number(toks[0])
                .ok_or_else(|| err(format!("unknown species {:?}", toks[0])))?;
            let v = floats(&toks[1..].join(" "), frame, "atom line")?;
            config.species.push(z);
            config.positions.push(Vector3::new(v[0], v[1], v[2]));
            if v.len() >= 6 {
                forces.push(Vector3::new(v[3], v[4], v[5]));
            }
        }
        if !forces.is_empty() {
            if forces.len() != nat {
                return Err(err(format!(
                    "force count mismatch: {} forces for {nat} atoms",
                    forces.len()
                )));
            }
            config.forces = Some(forces);
        }
        config.validate().map_err(|e| err(e.to_string()))?;
        frames.push(config);
        i += 2 + nat;
    }
    Ok(frames)
}

pub fn write_xyz(frames: &[Configuration]) -> String {
    let mut s = String::new();
    for c in frames {
        let _ = writeln!(s, "{}", c.len());
        let mut comment = Vec::new();
        if let Some(e) = c.energy {
            comment.push(format!("energy={e:?}"));
        }
        if let Some(cell) = &c.cell {
            let v: Vec<String> = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| format!("{:?}", cell[(i, j)]))
                .collect();
            comment.push(format!("Lattice=\"{}\"", v.join(" ")));
        }
        let pbc: Vec<&str> = c.periodic.iter().map(|&p| if p { "T" } else { "F" }).collect();
        comment.push(format!("pbc=\"{}\"", pbc.join(" ")));
        if let Some(w) = &c.virial {
            let v: Vec<String> = w.transpose().iter().map(|x| format!("{x:?}")).collect();
            comment.push(format!("virial=\"{}\"", v.join(" ")));
        }
        let _ = writeln!(s, "{}", comment.join(" "));
        for a in 0..c.len() {
            let p = c.positions[a];
            let _ = write!(s, "{} {:?} {:?} {:?}", symbol(c.species[a]), p.x, p.y, p.z);
            if let Some(f) = &c.forces {
                let _ = write!(s, " {:?} {:?} {:?}", f[a].x, f[a].y, f[a].z);
            }
            s.push('\n');
        }
    }
    s
}
