//! File formats, the on-disk skill library, ledger IO and the command-line
//! front end for `skillforge-core`.

pub mod config;
pub mod format;
pub mod ledger_csv;
pub mod library_dir;
pub mod report;
pub mod shared;
