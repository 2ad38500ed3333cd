//! Privacy-preserving participatory sensing primitives and protocols.
//!
//! Two instantiations share the same shape. Mobile nodes upload
//! `(tag, ciphertext)` reports and authorized queriers upload tags. An
//! untrusted broker matches tags by byte equality without learning what they
//! stand for.
//!
//! * [`pepsi`]: identifiers are identities of a blind-anonymous IBE scheme
//!   ([`ibe`]) over a pairing group ([`group`]), with a rotating nonce that
//!   lets the RA evict nodes.
//! * [`oprf`]: tags and keys are derived from blind-RSA signatures.
//!
//! Every group or modular operation is tallied by [`ops`].

pub mod group;
pub mod ibe;
pub mod ident;
pub mod measurement;
pub mod ops;
pub mod oprf;
pub mod pepsi;
pub mod sym;

pub use ident::Identifier;
pub use measurement::Measurement;
pub use pepsi_wire::{ReportEnvelope, SubscriptionUpload, Tag};
