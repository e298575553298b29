//! Plot data as CSV tables, with a small deterministic SVG renderer on top.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use super::scalar::PosteriorGrid;
use super::Histogram;
use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::liegroup::{matrix_to_euler, mollweide_project, Angles, GroupElement, GroupSpec};
use crate::rng::substream;

/// Display-only noise added to projected Mollweide coordinates.
pub const MOLLWEIDE_JITTER: f64 = 0.02;

/// Projection onto the two leading principal axes.
#[derive(Clone, Debug)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    pub axes: [Vec<f64>; 2],
    pub projected: Vec<[f64; 2]>,
}

impl Pca2 {
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let d = points.first().map(Vec::len).unwrap_or(0);
        if n == 0 || d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::contract("PCA needs nonempty points of one dimension"));
        }
        let mut mean = vec![0.0; d];
        for p in points {
            mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / n as f64);
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for p in points {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]);
                }
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let axis = |k: usize| -> Vec<f64> {
            match order.get(k) {
                Some(&c) => {
                    let v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
                    // sign convention: largest-magnitude entry positive
                    let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
                    v.iter().map(|x| if big < 0.0 { -x } else { *x }).collect()
                }
                None => vec![0.0; d],
            }
        };
        let axes = [axis(0), axis(1)];
        let projected = points
            .iter()
            .map(|p| {
                let c: Vec<f64> = p.iter().zip(&mean).map(|(x, m)| x - m).collect();
                [dot(&c, &axes[0]), dot(&c, &axes[1])]
            })
            .collect();
        Ok(Pca2 { mean, axes, projected })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centroids of each cloud along each trajectory with a shared 2-component
/// PCA. Rows: trajectory, step, t, centroid coordinates, pc1, pc2.
pub fn centroid_table(times: &[f64], trajectories: &[Vec<PointCloud>]) -> Result<String> {
    let dim = trajectories
        .iter()
        .flat_map(|t| t.first())
        .map(PointCloud::dim)
        .next()
        .unwrap_or(2);
    let cents: Vec<Vec<f64>> = trajectories.iter().flatten().map(PointCloud::centroid).collect();
    let pca = if cents.is_empty() { None } else { Some(Pca2::fit(&cents)?) };
    let mut s = String::from("trajectory,step,t");
    for c in ["x", "y", "z"].iter().take(dim) {
        write!(s, ",c{c}").unwrap();
    }
    s.push_str(",pc1,pc2\n");
    let mut k = 0;
    for (i, tr) in trajectories.iter().enumerate() {
        for (step, _) in tr.iter().enumerate() {
            let t = times.get(step).copied().unwrap_or(f64::NAN);
            write!(s, "{i},{step},{t:?}").unwrap();
            for x in &cents[k] {
                write!(s, ",{x:?}").unwrap();
            }
            let p = pca.as_ref().map(|p| p.projected[k]).unwrap();
            writeln!(s, ",{:?},{:?}", p[0], p[1]).unwrap();
            k += 1;
        }
    }
    Ok(s)
}

/// Euler angles and the Mollweide position of (lon, lat) = (yaw, pitch) for
/// SO(3) elements, with uniform jitter of ±`jitter` on the projected
/// coordinates from the stream `seed`.
pub fn euler_mollweide_table(elements: &[GroupElement], jitter: f64, seed: u64) -> Result<String> {
    let mut rng = substream(seed, 0);
    let mut s = String::from("index,yaw,pitch,roll,gimbal_lock,mollweide_x,mollweide_y,jitter_x,jitter_y\n");
    for (i, e) in elements.iter().enumerate() {
        if e.spec() != GroupSpec::SO3 {
            return Err(Error::contract("Euler tables need SO3 elements"));
        }
        let Angles::Euler {
            yaw,
            pitch,
            roll,
            gimbal_lock,
        } = matrix_to_euler(e.real())
        else {
            unreachable!("3×3 rotation")
        };
        let (x, y) = mollweide_project(yaw, pitch);
        let (jx, jy) = if jitter > 0.0 {
            (rng.gen_range(-jitter..=jitter), rng.gen_range(-jitter..=jitter))
        } else {
            (0.0, 0.0)
        };
        writeln!(
            s,
            "{i},{yaw:?},{pitch:?},{roll:?},{},{x:?},{y:?},{:?},{:?}",
            gimbal_lock as u8,
            x + jx,
            y + jy
        )
        .unwrap();
    }
    Ok(s)
}

pub fn velocity_grid_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("t,x,v\n");
    for (t, x, v) in rows {
        writeln!(s, "{t:?},{x:?},{v:?}").unwrap();
    }
    s
}

pub fn entropy_csv(grid: &PosteriorGrid) -> String {
    let lnk = (grid.k() as f64).ln();
    let mut s = String::from("step,t,entropy,entropy_over_ln_k,flagged\n");
    for (i, t) in grid.times.iter().enumerate() {
        let h = grid.entropy[i];
        writeln!(s, "{i},{t:?},{h:?},{:?},{}", h / lnk, grid.flagged[i]).unwrap();
    }
    s
}

/// Mean posterior per class (mode nearest to x₀), per time.
pub fn posterior_heat_csv(grid: &PosteriorGrid) -> String {
    let mut s = String::from("class,step,t");
    for k in 0..grid.k() {
        write!(s, ",p{k}").unwrap();
    }
    s.push('\n');
    for (c, rows) in grid.class_means().iter().enumerate() {
        for (step, row) in rows.iter().enumerate() {
            write!(s, "{c},{step},{:?}", grid.times[step]).unwrap();
            for p in row {
                write!(s, ",{p:?}").unwrap();
            }
            s.push('\n');
        }
    }
    s
}

/// Sample trajectories of the scalar flow. Rows: sample, step, t, x.
pub fn scalar_trajectory_csv(grid: &PosteriorGrid, max_samples: usize) -> String {
    let mut s = String::from("sample,step,t,x\n");
    for i in 0..grid.x0.len().min(max_samples) {
        for (step, t) in grid.times.iter().enumerate() {
            writeln!(s, "{i},{step},{t:?},{:?}", grid.trajectories[step][i]).unwrap();
        }
    }
    s
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 40.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            f = Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        if f.x1 - f.x0 < 1e-12 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 - f.y0 < 1e-12 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (SVG_W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        SVG_H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (SVG_H - 2.0 * MARGIN)
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn svg_open(title: &str, f: &Frame) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>"#, SVG_W / 2.0, escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        SVG_W - 2.0 * MARGIN,
        SVG_H - 2.0 * MARGIN
    )
    .unwrap();
    let b = SVG_H - MARGIN + 14.0;
    writeln!(s, r#"<text x="{MARGIN}" y="{b}" font-size="10">{:.3}</text>"#, f.x0).unwrap();
    writeln!(s, r#"<text x="{}" y="{b}" font-size="10" text-anchor="end">{:.3}</text>"#, SVG_W - MARGIN, f.x1).unwrap();
    writeln!(s, r#"<text x="4" y="{}" font-size="10">{:.3}</text>"#, SVG_H - MARGIN, f.y0).unwrap();
    writeln!(s, r#"<text x="4" y="{}" font-size="10">{:.3}</text>"#, MARGIN + 4.0, f.y1).unwrap();
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polylines, one per series.
pub fn line_svg(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, p)| p.iter().copied()));
    let mut s = svg_open(title, &f);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, path.join(" ")).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
            SVG_W - MARGIN - 4.0,
            MARGIN + 12.0 * (k + 1) as f64,
            escape(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Dots coloured by group index.
pub fn scatter_svg(title: &str, points: &[(f64, f64, usize)]) -> String {
    let f = Frame::fit(points.iter().map(|p| (p.0, p.1)));
    let mut s = svg_open(title, &f);
    for &(x, y, g) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{}"/>"#,
            f.px(x),
            f.py(y),
            PALETTE[g % PALETTE.len()]
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn histogram_svg(title: &str, h: &Histogram) -> String {
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame {
        x0: h.edges[0],
        x1: *h.edges.last().unwrap(),
        y0: 0.0,
        y1: top,
    };
    let mut s = svg_open(title, &f);
    for (i, &c) in h.counts.iter().enumerate() {
        let (xl, xr) = (f.px(h.edges[i]), f.px(h.edges[i + 1]));
        let (yt, yb) = (f.py(c as f64), f.py(0.0));
        writeln!(
            s,
            r##"<rect x="{xl:.2}" y="{yt:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4"/>"##,
            xr - xl,
            yb - yt
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::sample_prior;

    #[test]
    fn pca_is_exact_for_planar_points() {
        let mut rng = substream(21, 0);
        let (u, v) = ([0.6, 0.8, 0.0], [0.0, 0.0, 1.0]);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
                (0..3).map(|k| 0.5 + a * u[k] + b * v[k]).collect()
            })
            .collect();
        let pca = Pca2::fit(&pts).unwrap();
        for i in 0..pts.len() {
            // reconstruction
            let rec: Vec<f64> = (0..3)
                .map(|k| pca.mean[k] + pca.projected[i][0] * pca.axes[0][k] + pca.projected[i][1] * pca.axes[1][k])
                .collect();
            assert!(rec.iter().zip(&pts[i]).all(|(a, b)| (a - b).abs() < 1e-10));
            for j in 0..pts.len() {
                let d3 = super::super::euclidean(&pts[i], &pts[j]);
                let p = (pca.projected[i], pca.projected[j]);
                let d2 = ((p.0[0] - p.1[0]).powi(2) + (p.0[1] - p.1[1]).powi(2)).sqrt();
                assert!((d3 - d2).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_trajectories_give_constant_rows() {
        let c = PointCloud::from_points(&[[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]]);
        let trs = vec![vec![c.clone(); 5], vec![c.transform_matrix(&crate::liegroup::CMat::identity(3)); 5]];
        let csv = centroid_table(&[0.0, 0.25, 0.5, 0.75, 1.0], &trs).unwrap();
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r[3..] == rows[0][3..]));
        assert_eq!(rows[0][3], "2.0");
    }

    #[test]
    fn mollweide_jitter_is_bounded_and_seeded() {
        let mut rng = substream(22, 0);
        let els: Vec<GroupElement> = (0..100).map(|_| sample_prior(GroupSpec::SO3, &mut rng)).collect();
        let a = euler_mollweide_table(&els, MOLLWEIDE_JITTER, 1).unwrap();
        assert_eq!(a, euler_mollweide_table(&els, MOLLWEIDE_JITTER, 1).unwrap());
        for line in a.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((f[7] - f[5]).abs() <= MOLLWEIDE_JITTER && (f[8] - f[6]).abs() <= MOLLWEIDE_JITTER);
        }
        let plain = euler_mollweide_table(&els, 0.0, 1).unwrap();
        for line in plain.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[5], f[7]);
        }
    }

    #[test]
    fn svg_is_deterministic() {
        let series = vec![("a".to_string(), vec![(0.0, 1.0), (1.0, 0.5)])];
        assert_eq!(line_svg("t", &series), line_svg("t", &series));
        assert!(line_svg("t", &series).starts_with("<svg"));
        let h = Histogram::of_angles(&[0.1, 0.2, -1.0], 8).unwrap();
        assert_eq!(histogram_svg("h", &h).matches("<rect").count(), 2 + 8);
    }
}
