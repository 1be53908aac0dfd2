//! Attribute registry, dictionaries, and the numeric vector codec.

pub mod dict;
pub mod encode;
pub mod registry;

pub use dict::{DictionaryStore, ABSENT_CODE, GREASE_CODE, UNSEEN_CODE};
pub use encode::{cost_subset, encode, AttributeVector, EncodeMode, SlotLayout, SlotRange};
pub use registry::{
    extract, AttrId, AttrKind, AttrRow, AttributeRegistry, Applicability, CostTier,
    FieldCategory, GREASE_TOKEN,
};
