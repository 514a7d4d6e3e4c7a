use sha2::{Digest, Sha256};

pub(crate) struct Hasher(Sha256);

impl Hasher {
    pub(crate) fn new(tag: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(tag);
        Self(h)
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub(crate) fn f64(&mut self, x: f64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub(crate) fn u64(&mut self, x: u64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub(crate) fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}
