//! gnuplot scripts for the CSV outputs.

pub enum Axis {
    CacheSize,
    Alpha,
}

pub fn pfail(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale y\n\
         set xlabel 'overhead delta'\n\
         set ylabel 'P_F(delta)'\n\
         set grid\n\
         plot '{csv}' using 1:2 skip 1 with lines title 'P_F'\n"
    )
}

pub fn rates(csv: &str, axis: Axis) -> String {
    let (col, label) = match axis {
        Axis::CacheSize => (1, "M"),
        Axis::Alpha => (2, "alpha"),
    };
    format!(
        "set datafile separator ','\n\
         set xlabel '{label}'\n\
         set ylabel 'E[T]/k'\n\
         set grid\n\
         plot '{csv}' using {col}:(strcol(3) eq 'LT' ? $4 : 1/0) skip 1 with linespoints title 'LT', \\\n\
         \x20    '{csv}' using {col}:(strcol(3) eq 'MDS' ? $4 : 1/0) skip 1 with linespoints title 'MDS'\n"
    )
}
