//! Dense channel-major tensors for the network engine.

use crate::error::{invalid, Result};

/// (channels, z, y, x) tensor, x fastest. 2D data uses z extent 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    /// Spatial dims as [z, y, x].
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, dims: [usize; 3]) -> Tensor {
        Tensor {
            c,
            dims,
            data: vec![0.0; c * dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn new(c: usize, dims: [usize; 3], data: Vec<f64>) -> Result<Tensor> {
        if data.len() != c * dims[0] * dims[1] * dims[2] {
            return Err(invalid("tensor data length does not match shape"));
        }
        Ok(Tensor { c, dims, data })
    }

    #[inline]
    pub fn spatial_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.spatial_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.spatial_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stack two tensors along the channel axis.
    pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.dims != b.dims {
            return Err(invalid("concat requires matching spatial dims"));
        }
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Ok(Tensor {
            c: a.c + b.c,
            dims: a.dims,
            data,
        })
    }

    /// Split off the first `c_first` channels.
    pub fn split(&self, c_first: usize) -> (Tensor, Tensor) {
        let n = self.spatial_len();
        let first = Tensor {
            c: c_first,
            dims: self.dims,
            data: self.data[..c_first * n].to_vec(),
        };
        let second = Tensor {
            c: self.c - c_first,
            dims: self.dims,
            data: self.data[c_first * n..].to_vec(),
        };
        (first, second)
    }
}

/// Nearest-neighbour upsampling to `target` dims; each axis factor must be 1
/// or 2 (exact).
pub fn upsample_nearest(t: &Tensor, target: [usize; 3]) -> Result<Tensor> {
    let f: Vec<usize> = (0..3)
        .map(|a| {
            if target[a] == t.dims[a] {
                1
            } else if target[a] == 2 * t.dims[a] {
                2
            } else {
                0
            }
        })
        .collect();
    if f.contains(&0) {
        return Err(invalid(format!(
            "upsample target {target:?} is not a 1x/2x multiple of {:?}",
            t.dims
        )));
    }
    let mut out = Tensor::zeros(t.c, target);
    let [_, ny, nx] = t.dims;
    let [_, oy, ox] = target;
    for c in 0..t.c {
        let src = t.channel(c);
        let dst = out.channel_mut(c);
        for z in 0..target[0] {
            let sz = z / f[0];
            for y in 0..target[1] {
                let sy = y / f[1];
                let srow = &src[(sz * ny + sy) * nx..(sz * ny + sy) * nx + nx];
                let drow = &mut dst[(z * oy + y) * ox..(z * oy + y) * ox + ox];
                if f[2] == 1 {
                    drow.copy_from_slice(srow);
                } else {
                    for (x, d) in drow.iter_mut().enumerate() {
                        *d = srow[x / 2];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`upsample_nearest`]: sums each output cell's gradient back
/// into its source cell.
pub fn upsample_backward(grad: &Tensor, source: [usize; 3]) -> Tensor {
    let mut out = Tensor::zeros(grad.c, source);
    let [_, ny, nx] = source;
    let [_, gy, gx] = grad.dims;
    let f = [
        grad.dims[0] / source[0],
        grad.dims[1] / source[1],
        grad.dims[2] / source[2],
    ];
    for c in 0..grad.c {
        let g = grad.channel(c);
        let dst = out.channel_mut(c);
        for z in 0..grad.dims[0] {
            let sz = z / f[0];
            for y in 0..grad.dims[1] {
                let sy = y / f[1];
                let grow = &g[(z * gy + y) * gx..(z * gy + y) * gx + gx];
                let drow = &mut dst[(sz * ny + sy) * nx..(sz * ny + sy) * nx + nx];
                if f[2] == 1 {
                    for (d, v) in drow.iter_mut().zip(grow) {
                        *d += v;
                    }
                } else {
                    for (x, v) in grow.iter().enumerate() {
                        drow[x / 2] += v;
                    }
                }
            }
        }
    }
    out
}
