use std::io::{self, Write};

use super::CompletedTrip;

/// Network-wide aggregates after one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub t: u64,
    pub total_delay: f64,
    pub total_queued: usize,
    pub n_vehicles: usize,
}

pub fn write_trip_log<W: Write>(mut w: W, trips: &[CompletedTrip]) -> io::Result<()> {
    writeln!(w, "trip_id,depart_s,arrive_s,duration_s")?;
    for t in trips {
        writeln!(w, "{},{},{},{}", t.id, t.depart, t.arrive, t.duration())?;
    }
    Ok(())
}

pub fn write_step_log<W: Write>(mut w: W, steps: &[StepMetrics]) -> io::Result<()> {
    writeln!(w, "t,total_delay,total_queued,n_vehicles")?;
    for s in steps {
        writeln!(w, "{},{},{},{}", s.t, s.total_delay, s.total_queued, s.n_vehicles)?;
    }
    Ok(())
}
