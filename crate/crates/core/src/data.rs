//! CSV frames, chronological splits, z-scoring and sliding windows.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A multivariate series stored row-major as `[T × C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    pub channel_names: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    values: Vec<f64>,
}

impl TimeSeriesFrame {
    pub fn new(
        channel_names: Vec<String>,
        timestamps: Option<Vec<String>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let c = channel_names.len();
        if c == 0 {
            return Err(Error::Data("frame needs at least one channel".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(c) {
            return Err(Error::Data(format!(
                "{} values do not fill whole rows of {c} channels",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, channel {:?}",
                pos / c,
                channel_names[pos % c]
            )));
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() / c {
                return Err(Error::Data("timestamp count differs from row count".into()));
            }
        }
        Ok(TimeSeriesFrame {
            channel_names,
            timestamps,
            values,
        })
    }

    /// Frame from per-channel columns, named `ch0`, `ch1`, ... unless `names` is given.
    pub fn from_columns(columns: &[Vec<f64>], names: Option<Vec<String>>) -> Result<Self> {
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::Data("columns differ in length".into()));
        }
        let names = names.unwrap_or_else(|| (0..columns.len()).map(|i| format!("ch{i}")).collect());
        if names.len() != columns.len() {
            return Err(Error::Data("one name per column required".into()));
        }
        let mut values = Vec::with_capacity(len * columns.len());
        for t in 0..len {
            values.extend(columns.iter().map(|c| c[t]));
        }
        TimeSeriesFrame::new(names, None, values)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.channels()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let c = self.channels();
        &self.values[t * c..(t + 1) * c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(c)
            .step_by(self.channels())
            .copied()
            .collect()
    }

    /// Rows `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return Err(Error::Data(format!(
                "rows {start}..{} outside frame of {} rows",
                start + len,
                self.len()
            )));
        }
        let c = self.channels();
        TimeSeriesFrame::new(
            self.channel_names.clone(),
            self.timestamps
                .as_ref()
                .map(|ts| ts[start..start + len].to_vec()),
            self.values[start * c..(start + len) * c].to_vec(),
        )
    }

    /// Channel-major `[C × T]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let rows: Vec<Vec<f64>> = (0..self.channels()).map(|c| self.column(c)).collect();
        Tensor::from_rows(&rows).expect("frame is rectangular")
    }
}

fn is_date_column(name: &str) -> bool {
    name.trim().eq_ignore_ascii_case("date")
}

/// Parses a CSV whose first line is a header. A leading `date` column is kept
/// as timestamps; every other column must be numeric. Reported rows are file
/// line numbers (the header is line 1).
pub fn read_csv(reader: impl Read) -> Result<TimeSeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Data("empty CSV: no header".into()));
    }
    let has_date = is_date_column(&header[0]);
    let names: Vec<String> = header[usize::from(has_date)..].to_vec();
    if names.is_empty() {
        return Err(Error::Data("CSV has no value columns".into()));
    }
    let mut stamps = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut cells = record.iter();
        if has_date {
            stamps.push(cells.next().unwrap_or_default().to_string());
        }
        for (cell, name) in cells.zip(&names) {
            let bad = |message: String| Error::Parse {
                row: line,
                column: name.clone(),
                message,
            };
            if cell.is_empty() {
                return Err(bad("missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("cannot parse {cell:?} as a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::Data("CSV has a header but no data rows".into()));
    }
    TimeSeriesFrame::new(names, has_date.then_some(stamps), values)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesFrame> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(file))
}

/// Writes values with 17 significant digits, enough to reload them exactly.
pub fn write_csv(frame: &TimeSeriesFrame, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(frame.channels() + 1);
    if frame.timestamps.is_some() {
        header.push("date".to_string());
    }
    header.extend(frame.channel_names.iter().cloned());
    w.write_record(&header)?;
    for t in 0..frame.len() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(ts) = &frame.timestamps {
            rec.push(ts[t].clone());
        }
        rec.extend(frame.row(t).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(frame: &TimeSeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    write_csv(frame, std::fs::File::create(path)?)
}

/// Train/validation/test sizes, either as row counts or fractions of T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    Lengths(usize, usize, usize),
    Ratios(f64, f64, f64),
}

impl SplitSpec {
    pub fn lengths(&self, total: usize) -> Result<(usize, usize, usize)> {
        let (a, b, c) = match *self {
            SplitSpec::Lengths(a, b, c) => (a, b, c),
            SplitSpec::Ratios(a, b, c) => {
                if [a, b, c].iter().any(|r| !(*r > 0.0 && *r <= 1.0)) || a + b + c > 1.0 + 1e-9 {
                    return Err(Error::Config(format!(
                        "split ratios must be positive and sum to at most 1, got ({a}, {b}, {c})"
                    )));
                }
                // Small slack so 0.7 * 100 lands on 70, not 69.
                let n = |r: f64| (r * total as f64 + 1e-9).floor() as usize;
                (n(a), n(b), n(c))
            }
        };
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::Config(format!(
                "every split needs at least one row, got ({a}, {b}, {c})"
            )));
        }
        if a + b + c > total {
            return Err(Error::Config(format!(
                "split ({a}, {b}, {c}) exceeds {total} rows"
            )));
        }
        Ok((a, b, c))
    }
}

/// Contiguous train, validation and test segments from the start of the frame.
pub fn chronological_split(
    frame: &TimeSeriesFrame,
    spec: SplitSpec,
) -> Result<(TimeSeriesFrame, TimeSeriesFrame, TimeSeriesFrame)> {
    let (a, b, c) = spec.lengths(frame.len())?;
    Ok((
        frame.slice(0, a)?,
        frame.slice(a, b)?,
        frame.slice(a + b, c)?,
    ))
}

/// Per-channel z-score statistics fitted on a training frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub channel_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &TimeSeriesFrame) -> Result<Self> {
        let n = train.len() as f64;
        let mut mean = Vec::with_capacity(train.channels());
        let mut std = Vec::with_capacity(train.channels());
        for c in 0..train.channels() {
            let col = train.column(c);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if !(s > 1e-12 * m.abs().max(1.0)) {
                return Err(Error::Data(format!(
                    "channel {:?} has zero variance in the training split",
                    train.channel_names[c]
                )));
            }
            mean.push(m);
            std.push(s);
        }
        Ok(Standardizer {
            channel_names: train.channel_names.clone(),
            mean,
            std,
        })
    }

    fn check(&self, frame: &TimeSeriesFrame) -> Result<()> {
        if frame.channels() != self.mean.len() {
            return Err(Error::Data(format!(
                "frame has {} channels, statistics cover {}",
                frame.channels(),
                self.mean.len()
            )));
        }
        Ok(())
    }

    fn apply(
        &self,
        frame: &TimeSeriesFrame,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<TimeSeriesFrame> {
        self.check(frame)?;
        let c = frame.channels();
        let values = frame
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, self.mean[i % c], self.std[i % c]))
            .collect();
        TimeSeriesFrame::new(
            frame.channel_names.clone(),
            frame.timestamps.clone(),
            values,
        )
    }

    pub fn transform(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        self.apply(frame, |v, m, s| (v - m) / s)
    }

    pub fn inverse(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        self.apply(frame, |v, m, s| v * s + m)
    }

    /// Maps a channel-major `[C × L]` tensor back to raw units.
    pub fn inverse_tensor(&self, t: &Tensor) -> Result<Tensor> {
        if t.ndim() != 2 || t.rows() != self.mean.len() {
            return Err(Error::shape(
                "inverse_tensor",
                t.shape(),
                &[self.mean.len(), 0],
            ));
        }
        let l = t.cols();
        let mut out = t.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let c = i / l;
            *v = *v * self.std[c] + self.mean[c];
        }
        Ok(out)
    }
}

/// Fits on `train` and transforms `train` followed by each of `others`.
pub fn standardize(
    train: &TimeSeriesFrame,
    others: &[&TimeSeriesFrame],
) -> Result<(Vec<TimeSeriesFrame>, Standardizer)> {
    let stats = Standardizer::fit(train)?;
    let mut out = vec![stats.transform(train)?];
    for f in others {
        out.push(stats.transform(f)?);
    }
    Ok((out, stats))
}

/// Split sizes and standardization statistics, for run snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub rows: usize,
    pub split: (usize, usize, usize),
    pub standardizer: Standardizer,
}

/// One supervised window: input `[C × I]`, target `[C × O]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub target: Tensor,
}

pub fn window_count(len: usize, input_len: usize, output_len: usize, stride: usize) -> usize {
    if stride == 0 || len < input_len + output_len {
        0
    } else {
        (len - input_len - output_len) / stride + 1
    }
}

/// Sliding windows over one frame; sample `k` starts at row `k * stride`.
pub fn windows(
    frame: &TimeSeriesFrame,
    input_len: usize,
    output_len: usize,
    stride: usize,
) -> Result<Vec<Sample>> {
    if input_len == 0 || output_len == 0 || stride == 0 {
        return Err(Error::Config(
            "window input/output lengths and stride must be positive".into(),
        ));
    }
    if frame.len() < input_len + output_len {
        return Err(Error::TooShort {
            needed: input_len + output_len - 1,
            got: frame.len(),
        });
    }
    let c = frame.channels();
    let columns: Vec<Vec<f64>> = (0..c).map(|ch| frame.column(ch)).collect();
    let take = |start: usize, len: usize| {
        let data: Vec<f64> = columns
            .iter()
            .flat_map(|col| col[start..start + len].iter().copied())
            .collect();
        Tensor::new(&[c, len], data).expect("window shape")
    };
    Ok(
        (0..window_count(frame.len(), input_len, output_len, stride))
            .map(|k| {
                let s = k * stride;
                Sample {
                    input: take(s, input_len),
                    target: take(s + input_len, output_len),
                }
            })
            .collect(),
    )
}
