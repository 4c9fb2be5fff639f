//! Fixed-rate scheduling of agent syncs.

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::Agent;

/// Cloneable stop flag that can be raised from any thread.
#[derive(Debug, Clone, Default)]
pub struct StopSignal {
    inner: Arc<(Mutex<bool>, Condvar)>,
}

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stop(&self) {
        let (flag, cond) = &*self.inner;
        *flag.lock().expect("stop flag poisoned") = true;
        cond.notify_all();
    }

    pub fn is_stopped(&self) -> bool {
        *self.inner.0.lock().expect("stop flag poisoned")
    }

    /// Sleeps until `deadline` or until stopped. Returns true if stopped.
    pub fn wait_until(&self, deadline: Instant) -> bool {
        let (flag, cond) = &*self.inner;
        let mut stopped = flag.lock().expect("stop flag poisoned");
        while !*stopped {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            stopped = cond
                .wait_timeout(stopped, deadline - now)
                .expect("stop flag poisoned")
                .0;
        }
        *stopped
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PeriodicStats {
    pub syncs: usize,
    pub skipped_ticks: usize,
    pub failed: usize,
}

/// Syncs at every multiple of `interval` until `stop` is raised.
///
/// Ticks are never queued: a tick that falls while a sync is still running
/// (here or via [`Agent::sync_now`] elsewhere) is skipped.
pub fn run_periodic(agent: &Agent, interval: Duration, stop: &StopSignal) -> PeriodicStats {
    assert!(!interval.is_zero(), "poll interval must be positive");
    let mut stats = PeriodicStats::default();
    let origin = Instant::now();
    let mut tick: u32 = 1;
    loop {
        if stop.wait_until(origin + interval * tick) {
            break;
        }
        match agent.try_sync() {
            Ok(Some(report)) => {
                stats.syncs += 1;
                tracing::info!(added = report.added(), "periodic sync finished");
            }
            Ok(None) => stats.skipped_ticks += 1,
            Err(e) => {
                stats.failed += 1;
                tracing::warn!(error = %e, "periodic sync failed");
            }
        }
        let elapsed = (origin.elapsed().as_nanos() / interval.as_nanos()) as u32;
        if elapsed > tick {
            stats.skipped_ticks += (elapsed - tick) as usize;
            tick = elapsed;
        }
        tick += 1;
    }
    stats
}
