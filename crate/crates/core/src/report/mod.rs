//! CSV records and SVG figures.

mod csv;
mod svg;

pub use self::csv::{emit_records_csv, fmt_sig9, parse_records_csv, CSV_HEADER};
pub use self::svg::{
    emit_heatmap, emit_line_plot, heatmap_from_report, line_plot_from_report, ramp_color, Heatmap,
    LinePlot, Series, RAMP_HI, RAMP_LO,
};
