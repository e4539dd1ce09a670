//! File formats: paired-sample CSV input and the reference cache.

pub mod cache;
pub mod csv;

pub use self::cache::{cache_reference, load_reference, CacheKey, CachedReferences};
pub use self::csv::{read_paired_csv, read_paired_csv_from, CsvOptions};
