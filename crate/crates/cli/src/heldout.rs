//! Held-out rows behind an access log.

use std::sync::Mutex;

use varlab::TimeSeriesFrame;

use crate::manifest::TestAccess;

/// The test frame. Its row count is public; its values are only reachable
/// through [`HeldOut::read`], which records the calling stage.
#[derive(Debug)]
pub struct HeldOut {
    frame: TimeSeriesFrame,
    log: Mutex<Vec<TestAccess>>,
}

impl HeldOut {
    pub fn new(frame: TimeSeriesFrame) -> Self {
        Self { frame, log: Mutex::new(Vec::new()) }
    }

    pub fn rows(&self) -> usize {
        self.frame.len()
    }

    pub fn read(&self, stage: &str) -> &TimeSeriesFrame {
        self.log
            .lock()
            .expect("access log poisoned")
            .push(TestAccess { stage: stage.to_string(), rows: self.frame.len() });
        &self.frame
    }

    pub fn accesses(&self) -> Vec<TestAccess> {
        self.log.lock().expect("access log poisoned").clone()
    }
}
