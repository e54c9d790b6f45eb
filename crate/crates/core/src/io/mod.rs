//! External data formats: binary frame-stream containers, CSV reports, and
//! P5 graymap rasters.

pub mod container;
pub mod csv;
pub mod raster;

pub use container::{
    read_measurements, read_phases, write_atomic, write_measurements, write_phases,
    MeasurementReader, PhaseReader, StreamHeader, StreamWriter,
};
pub use csv::{
    read_aggregate_csv, read_strehl_csv, read_sweep_csv, write_aggregate_csv, write_strehl_csv,
    write_sweep_csv, SweepRow,
};
pub use raster::{read_raster, write_raster, GrayImage};
