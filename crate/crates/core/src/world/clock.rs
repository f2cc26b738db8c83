/// Global tick counter. Starts at 0; only the scenario driver advances it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Clock {
    now: u64,
}

impl Clock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn increment(&mut self) -> u64 {
        self.now += 1;
        self.now
    }
}
