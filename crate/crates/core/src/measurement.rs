/// Default cap on a report payload (64 KiB).
pub const DEFAULT_MAX_PAYLOAD: usize = 64 * 1024;

/// Application data carried by a report.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Measurement(pub Vec<u8>);

impl Measurement {
    pub fn payload(&self) -> &[u8] {
        &self.0
    }
}

impl From<Vec<u8>> for Measurement {
    fn from(payload: Vec<u8>) -> Self {
        Measurement(payload)
    }
}

impl From<&[u8]> for Measurement {
    fn from(payload: &[u8]) -> Self {
        Measurement(payload.to_vec())
    }
}

impl From<&str> for Measurement {
    fn from(payload: &str) -> Self {
        Measurement(payload.as_bytes().to_vec())
    }
}
