//! Canonical schedule and airport CSV files.
//!
//! Schedule: header `id,origin,destination,dep,arr,tail`, times in UTC minutes.
//! Airports: header `code,city,is_crew_base`.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::rules::{Airport, Flight, Schedule, ScheduleError};

pub const SCHEDULE_HEADER: &str = "id,origin,destination,dep,arr,tail";
pub const AIRPORTS_HEADER: &str = "code,city,is_crew_base";

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{file} line {line}: {msg}")]
    Parse { file: &'static str, line: usize, msg: String },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn rows<R: BufRead>(r: R, file: &'static str, header: &str) -> Result<Vec<(usize, Vec<String>)>, FileError> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if !saw_header {
            if text.replace(' ', "") != header {
                return Err(FileError::Parse {
                    file,
                    line: line_no,
                    msg: format!("expected header `{header}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<String> = text.split(',').map(|f| f.trim().to_string()).collect();
        let want = header.split(',').count();
        if fields.len() != want {
            return Err(FileError::Parse {
                file,
                line: line_no,
                msg: format!("expected {want} fields, found {}", fields.len()),
            });
        }
        out.push((line_no, fields));
    }
    if !saw_header {
        return Err(FileError::Parse {
            file,
            line: 1,
            msg: format!("missing header `{header}`"),
        });
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(file: &'static str, line: usize, name: &str, v: &str) -> Result<T, FileError> {
    v.parse().map_err(|_| FileError::Parse {
        file,
        line,
        msg: format!("bad {name} `{v}`"),
    })
}

pub fn read_flights<R: BufRead>(r: R) -> Result<Vec<Flight>, FileError> {
    const F: &str = "schedule";
    rows(r, F, SCHEDULE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(Flight {
                id: field(F, line, "id", &f[0])?,
                origin: f[1].clone(),
                destination: f[2].clone(),
                dep: field(F, line, "dep", &f[3])?,
                arr: field(F, line, "arr", &f[4])?,
                tail: f[5].clone(),
            })
        })
        .collect()
}

pub fn read_airports<R: BufRead>(r: R) -> Result<Vec<Airport>, FileError> {
    const F: &str = "airports";
    rows(r, F, AIRPORTS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(Airport {
                code: f[0].clone(),
                city: f[1].clone(),
                is_crew_base: field(F, line, "is_crew_base", &f[2])?,
            })
        })
        .collect()
}

pub fn read_schedule<R1: BufRead, R2: BufRead>(flights: R1, airports: R2) -> Result<Schedule, FileError> {
    Ok(Schedule::new(read_flights(flights)?, read_airports(airports)?)?)
}

pub fn write_flights<W: Write>(mut w: W, flights: &[Flight]) -> io::Result<()> {
    writeln!(w, "{SCHEDULE_HEADER}")?;
    for f in flights {
        writeln!(w, "{},{},{},{},{},{}", f.id, f.origin, f.destination, f.dep, f.arr, f.tail)?;
    }
    Ok(())
}

pub fn write_airports<W: Write>(mut w: W, airports: &[Airport]) -> io::Result<()> {
    writeln!(w, "{AIRPORTS_HEADER}")?;
    for a in airports {
        writeln!(w, "{},{},{}", a.code, a.city, a.is_crew_base)?;
    }
    Ok(())
}
