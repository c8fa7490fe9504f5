//! Configuration, tables and field dumps.

mod config;
mod field;
mod table;

pub use config::{parse_config, Command, RunConfig};
pub use field::{decode_field, dump_field, encode_field, load_field, FieldKind, FieldRef, LoadedField, MAGIC, VERSION};
pub use table::{
    fmt_full, green_table, radial_profile_table, read_table, sweep_table, write_table, Table,
};
