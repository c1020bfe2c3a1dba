//! Trace sinks: in-memory, discarding, and CSV files.

use std::fs::File;
use std::io::{BufWriter, Write};

use crate::error::Result;
use crate::sim::{EventRecord, Metrics, TraceRow, TRACE_HEADER};
use crate::coordination::OvertakingKind;

pub trait TraceSink {
    fn row(&mut self, row: &TraceRow) -> Result<()>;
    fn event(&mut self, event: &EventRecord) -> Result<()>;
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryTrace {
    pub rows: Vec<TraceRow>,
    pub events: Vec<EventRecord>,
}

impl TraceSink for MemoryTrace {
    fn row(&mut self, row: &TraceRow) -> Result<()> {
        self.rows.push(*row);
        Ok(())
    }

    fn event(&mut self, event: &EventRecord) -> Result<()> {
        self.events.push(*event);
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullTrace;

impl TraceSink for NullTrace {
    fn row(&mut self, _: &TraceRow) -> Result<()> {
        Ok(())
    }

    fn event(&mut self, _: &EventRecord) -> Result<()> {
        Ok(())
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Plot-ready long format: one `(t, series, value)` line per sample.
pub struct SeriesWriter<W: Write> {
    out: csv::Writer<W>,
    every: usize,
}

impl<W: Write> SeriesWriter<W> {
    pub fn new(writer: W, every: usize) -> Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "series", "value"])?;
        Ok(SeriesWriter {
            out,
            every: every.max(1),
        })
    }

    fn row(&mut self, step: usize, r: &TraceRow) -> Result<()> {
        if step % self.every != 0 {
            return Ok(());
        }
        let t = r.t.to_string();
        for (name, value) in [
            ("rho", r.rho),
            ("psi", r.psi),
            ("zeta", r.zeta),
            ("v", r.v),
            ("omega", r.omega),
            ("x", r.x),
            ("y", r.y),
        ] {
            self.out
                .write_record([t.as_str(), &format!("{name}_{}", r.uav), &value.to_string()])?;
        }
        Ok(())
    }
}

/// Writes `trace.csv`, `events.csv` and optionally the long-format series.
pub struct CsvTrace<W: Write> {
    trace: csv::Writer<W>,
    events: csv::Writer<W>,
    series: Option<SeriesWriter<W>>,
    every: usize,
    step: usize,
    last_t: Option<f64>,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(trace: W, events: W, series: Option<SeriesWriter<W>>, every: usize) -> Result<Self> {
        let mut trace = csv::Writer::from_writer(trace);
        trace.write_record(TRACE_HEADER)?;
        let mut events = csv::Writer::from_writer(events);
        events.write_record(["t", "uav", "kind", "from", "to"])?;
        Ok(CsvTrace {
            trace,
            events,
            series,
            every: every.max(1),
            step: 0,
            last_t: None,
        })
    }
}

impl CsvTrace<BufWriter<File>> {
    /// Creates the files inside `dir`.
    pub fn create(dir: &std::path::Path, every: usize, series_every: Option<usize>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        let series = match series_every {
            Some(k) => Some(SeriesWriter::new(open("series.csv")?, k)?),
            None => None,
        };
        CsvTrace::new(open("trace.csv")?, open("events.csv")?, series, every)
    }
}

impl<W: Write> TraceSink for CsvTrace<W> {
    fn row(&mut self, r: &TraceRow) -> Result<()> {
        match self.last_t {
            Some(t) if t == r.t => {}
            Some(_) => {
                self.step += 1;
                self.last_t = Some(r.t);
            }
            None => self.last_t = Some(r.t),
        }
        if let Some(s) = self.series.as_mut() {
            s.row(self.step, r)?;
        }
        if self.step % self.every != 0 {
            return Ok(());
        }
        self.trace.write_record([
            r.t.to_string(),
            r.uav.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.theta.to_string(),
            r.rho.to_string(),
            r.psi.to_string(),
            r.s.to_string(),
            r.region.to_string(),
            r.v.to_string(),
            r.omega.to_string(),
            r.zeta.to_string(),
            opt(r.pre_neighbor),
            u8::from(r.resetvalue).to_string(),
        ])?;
        Ok(())
    }

    fn event(&mut self, e: &EventRecord) -> Result<()> {
        let (from, to) = match e.event.kind {
            OvertakingKind::PreNeighborChanged { from, to } => (opt(from), opt(to)),
            OvertakingKind::ZeroCrossing { other } => (other.to_string(), other.to_string()),
        };
        self.events.write_record([
            e.t.to_string(),
            e.event.uav.to_string(),
            e.event.kind.label().to_string(),
            from,
            to,
        ])?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.trace.flush()?;
        self.events.flush()?;
        if let Some(s) = self.series.as_mut() {
            s.out.flush()?;
        }
        Ok(())
    }
}

pub fn write_metrics(path: &std::path::Path, metrics: &Metrics) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, metrics)?;
    Ok(())
}
