//! Dependency-free SVG heat maps with a diverging color scale: negative red,
//! positive blue, white at zero. Rows and columns can be reordered or
//! filtered before rendering (e.g. clause-sorted columns, witness-filtered
//! rows).

use std::fs;
use std::io::Write;
use std::path::Path;

use fcc_core::matrix::Matrix;

const CELL: usize = 12;
const GAP: usize = 1;

/// Map a value to a diverging RGB color, scaled by `max_abs`.
pub fn diverging_color(value: f64, max_abs: f64) -> (u8, u8, u8) {
    if max_abs <= 0.0 || !value.is_finite() {
        return (255, 255, 255);
    }
    let t = (value.abs() / max_abs).min(1.0);
    let shade = (255.0 * (1.0 - t)).round() as u8;
    if value >= 0.0 {
        (shade, shade, 255) // toward blue
    } else {
        (255, shade, shade) // toward red
    }
}

/// Render the matrix (optionally reordered/filtered) as an SVG string.
pub fn heatmap_svg(matrix: &Matrix, row_order: Option<&[usize]>, col_order: Option<&[usize]>) -> String {
    let default_rows: Vec<usize> = (0..matrix.rows()).collect();
    let default_cols: Vec<usize> = (0..matrix.cols()).collect();
    let rows = row_order.unwrap_or(&default_rows);
    let cols = col_order.unwrap_or(&default_cols);
    let max_abs = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| matrix.get(r, c).abs()))
        .fold(0.0f64, f64::max);
    let width = cols.len() * (CELL + GAP) + GAP;
    let height = rows.len() * (CELL + GAP) + GAP;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#f8f8f8\"/>\n");
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            let (red, green, blue) = diverging_color(matrix.get(r, c), max_abs);
            let x = GAP + ci * (CELL + GAP);
            let y = GAP + ri * (CELL + GAP);
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({red},{green},{blue})\"><title>r{r} c{c} {v:.4}</title></rect>\n",
                v = matrix.get(r, c)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write the heat map to `path`.
pub fn emit_heatmap(
    matrix: &Matrix,
    row_order: Option<&[usize]>,
    col_order: Option<&[usize]>,
    path: &Path,
) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(heatmap_svg(matrix, row_order, col_order).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_positive_cell_is_blue() {
        let m = Matrix::from_rows(vec![vec![1.0]]).unwrap();
        let svg = heatmap_svg(&m, None, None);
        assert!(svg.contains("fill=\"rgb(0,0,255)\""), "{svg}");
        assert_eq!(svg.matches("<rect x=").count(), 1);
    }

    #[test]
    fn negative_is_red_zero_is_white() {
        assert_eq!(diverging_color(-2.0, 2.0), (255, 0, 0));
        assert_eq!(diverging_color(0.0, 2.0), (255, 255, 255));
        assert_eq!(diverging_color(1.0, 2.0), (128, 128, 255));
    }

    #[test]
    fn symmetric_matrix_renders_symmetric_fills() {
        let m = Matrix::from_rows(vec![
            vec![1.0, -0.5, 0.2],
            vec![-0.5, 0.3, 0.9],
            vec![0.2, 0.9, -1.0],
        ])
        .unwrap();
        let svg = heatmap_svg(&m, None, None);
        for r in 0..3 {
            for c in 0..3 {
                let a = diverging_color(m.get(r, c), 1.0);
                let b = diverging_color(m.get(c, r), 1.0);
                assert_eq!(a, b);
            }
        }
        assert_eq!(svg.matches("<rect x=").count(), 9);
    }

    #[test]
    fn row_filter_and_column_order_select_the_right_cells() {
        let m = Matrix::from_rows(vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]).unwrap();
        let svg = heatmap_svg(&m, Some(&[1]), Some(&[2, 0]));
        // only row 1 rendered, columns in order 2 then 0
        assert_eq!(svg.matches("<rect x=").count(), 2);
        let first = svg.find("r1 c2").unwrap();
        let second = svg.find("r1 c0").unwrap();
        assert!(first < second);
        assert!(!svg.contains("r0 "));
    }
}
