//! Quadrature helpers shared by the density, assembly and risk code.

// 10-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Fixed 10-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Adaptive bisection on top of the 10-point rule.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let whole = gauss_legendre(f, a, b);
    refine(f, a, b, whole, tol, 48)
}

fn refine(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    let sum = left + right;
    if depth == 0 || (sum - whole).abs() <= tol || mid <= a || mid >= b {
        return sum;
    }
    refine(f, a, mid, left, 0.5 * tol, depth - 1) + refine(f, mid, b, right, 0.5 * tol, depth - 1)
}

/// Trapezoid rule on sorted nodes.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Nodes `a, a + h, ..., b` aligned to multiples of `h`, with extra breakpoints
/// inserted when they fall strictly inside `(a, b)`.
pub fn aligned_nodes(a: f64, b: f64, h: f64, breaks: &[f64]) -> Vec<f64> {
    let mut nodes = vec![a];
    let mut i = (a / h).floor() as i64 + 1;
    loop {
        let x = i as f64 * h;
        if x >= b {
            break;
        }
        if x > a {
            nodes.push(x);
        }
        i += 1;
    }
    nodes.push(b);
    for &c in breaks {
        if c > a && c < b {
            nodes.push(c);
        }
    }
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nodes.dedup();
    nodes
}
