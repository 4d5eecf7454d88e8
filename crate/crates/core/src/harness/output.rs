use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::Policy;
use crate::harness::run::{RunRecord, RunRow};

/// Column names for `users` users and `streams` streams.
pub fn csv_header(users: usize, streams: usize) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "policy", "slot", "epoch", "status", "average_rate"].map(String::from).to_vec();
    h.extend((0..users).map(|k| format!("user_rate_{k}")));
    h.extend((0..streams).map(|s| format!("reward_{s}")));
    h.extend((0..streams).map(|s| format!("penalty_{s}")));
    h.extend(["epsilon", "lr", "greedy_one_pass"].map(String::from));
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the record as CSV. Floats use Rust's shortest round-trip form, so
/// reading the file back reproduces every value bit for bit.
pub fn write_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(record.users, record.streams))?;
    for r in &record.rows {
        if r.user_rates.len() != record.users
            || r.rewards.len() != record.streams
            || r.penalties.len() != record.streams
        {
            return Err(Error::Shape(format!("row for slot {} does not match the record widths", r.slot)));
        }
        let mut fields = vec![
            r.seed.to_string(),
            r.policy.name().to_string(),
            r.slot.to_string(),
            r.epoch.to_string(),
            if r.singular { "singular" } else { "ok" }.to_string(),
            r.average_rate.to_string(),
        ];
        fields.extend(r.user_rates.iter().map(f64::to_string));
        fields.extend(r.rewards.iter().map(f64::to_string));
        fields.extend(r.penalties.iter().map(f64::to_string));
        fields.extend([opt(r.epsilon), opt(r.lr), opt(r.greedy_one_pass)]);
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(record: &RunRecord, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(record, std::io::BufWriter::new(file))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field.parse().map_err(|_| Error::Format(format!("line {line}: bad {what} `{field}`")))
}

fn parse_opt(field: &str, what: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what, line).map(Some)
    }
}

/// Reads a file written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<RunRecord> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let users = header.iter().filter(|h| h.starts_with("user_rate_")).count();
    let streams = header.iter().filter(|h| h.starts_with("reward_")).count();
    if header != csv_header(users, streams) {
        return Err(Error::Format("unexpected CSV header".into()));
    }
    let mut record = RunRecord::new(users, streams);
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let f = |j: usize| row.get(j).unwrap_or("");
        let base = 6;
        let floats = |from: usize, n: usize, what: &str| -> Result<Vec<f64>> {
            (from..from + n).map(|j| parse(f(j), what, line)).collect()
        };
        let tail = base + users + 2 * streams;
        record.rows.push(RunRow {
            seed: parse(f(0), "seed", line)?,
            policy: f(1).parse::<Policy>().map_err(|_| Error::Format(format!("line {line}: bad policy `{}`", f(1))))?,
            slot: parse(f(2), "slot", line)?,
            epoch: parse(f(3), "epoch", line)?,
            singular: match f(4) {
                "ok" => false,
                "singular" => true,
                other => return Err(Error::Format(format!("line {line}: bad status `{other}`"))),
            },
            average_rate: parse(f(5), "average_rate", line)?,
            user_rates: floats(base, users, "user rate")?,
            rewards: floats(base + users, streams, "reward")?,
            penalties: floats(base + users + streams, streams, "penalty")?,
            epsilon: parse_opt(f(tail), "epsilon", line)?,
            lr: parse_opt(f(tail + 1), "lr", line)?,
            greedy_one_pass: parse_opt(f(tail + 2), "greedy_one_pass", line)?,
        });
    }
    Ok(record)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<RunRecord> {
    read_csv(std::fs::File::open(path)?)
}
