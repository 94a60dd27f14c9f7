//! Differentiable operations. Forward math lives in free helpers so the
//! backward closures can reuse them on captured values.

use std::rc::Rc;

use ndarray::{s, Array1, Array3, Array4, ArrayD, ArrayView3, ArrayView4, Axis, Ix1, Ix3, Ix4};

use crate::error::{Error, Result};

use super::tape::{Scalar, Tape, Var};

const INSTANCE_NORM_EPS: f64 = 1e-5;
const COMPLEX_L1_EPS: f64 = 1e-8;
/// Negative-region slope of the leaky ReLU; the subgradient at 0 is 1.
const LEAKY_SLOPE: f64 = 0.2;

fn view3<T: Scalar>(a: &ArrayD<T>, what: &str) -> Result<ArrayView3<'_, T>> {
    a.view()
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::dim(format!("{what}: expected [C,H,W], got {:?}", a.shape())))
}

fn view4<T: Scalar>(a: &ArrayD<T>, what: &str) -> Result<ArrayView4<'_, T>> {
    a.view()
        .into_dimensionality::<Ix4>()
        .map_err(|_| Error::dim(format!("{what}: expected 4-d kernel, got {:?}", a.shape())))
}

/// Shape-preserving cross-correlation with odd square kernels, zero padding.
fn conv2d_forward<T: Scalar>(x: ArrayView3<T>, k: ArrayView4<T>, b: &ArrayD<T>) -> Result<Array3<T>> {
    let (cin, h, w) = x.dim();
    let (cout, kcin, kh, kw) = k.dim();
    if kcin != cin {
        return Err(Error::dim(format!("conv2d: kernel expects {kcin} input channels, input has {cin}")));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(Error::dim(format!("conv2d: kernels must be odd squares, got {kh}x{kw}")));
    }
    if b.shape() != [cout] {
        return Err(Error::dim(format!("conv2d: bias shape {:?} != [{cout}]", b.shape())));
    }
    let pad = (kh / 2) as isize;
    let mut out = Array3::<T>::zeros((cout, h, w));
    for co in 0..cout {
        let mut out_c = out.index_axis_mut(Axis(0), co);
        for ci in 0..cin {
            let x_c = x.index_axis(Axis(0), ci);
            for ky in 0..kh {
                for kx in 0..kw {
                    let wgt = k[[co, ci, ky, kx]];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    let oy0 = (-dy).max(0) as usize;
                    let oy1 = ((h as isize - dy).min(h as isize)) as usize;
                    let ox0 = (-dx).max(0) as usize;
                    let ox1 = ((w as isize - dx).min(w as isize)) as usize;
                    if oy0 >= oy1 || ox0 >= ox1 {
                        continue;
                    }
                    let (iy0, iy1) = ((oy0 as isize + dy) as usize, (oy1 as isize + dy) as usize);
                    let (ix0, ix1) = ((ox0 as isize + dx) as usize, (ox1 as isize + dx) as usize);
                    out_c
                        .slice_mut(s![oy0..oy1, ox0..ox1])
                        .scaled_add(wgt, &x_c.slice(s![iy0..iy1, ix0..ix1]));
                }
            }
        }
        let bias = b[[co]];
        out_c.mapv_inplace(|v| v + bias);
    }
    Ok(out)
}

fn conv2d_backward<T: Scalar>(
    x: ArrayView3<T>,
    k: ArrayView4<T>,
    gout: ArrayView3<T>,
) -> (Array3<T>, Array4<T>, Array1<T>) {
    let (cin, h, w) = x.dim();
    let (cout, _, kh, kw) = k.dim();
    let pad = (kh / 2) as isize;
    let mut gx = Array3::<T>::zeros((cin, h, w));
    let mut gk = Array4::<T>::zeros(k.raw_dim());
    let mut gb = Array1::<T>::zeros(cout);
    for co in 0..cout {
        let g_c = gout.index_axis(Axis(0), co);
        gb[co] = g_c.iter().copied().sum();
        for ci in 0..cin {
            let x_c = x.index_axis(Axis(0), ci);
            let mut gx_c = gx.index_axis_mut(Axis(0), ci);
            for ky in 0..kh {
                for kx in 0..kw {
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    let oy0 = (-dy).max(0) as usize;
                    let oy1 = ((h as isize - dy).min(h as isize)) as usize;
                    let ox0 = (-dx).max(0) as usize;
                    let ox1 = ((w as isize - dx).min(w as isize)) as usize;
                    if oy0 >= oy1 || ox0 >= ox1 {
                        continue;
                    }
                    let (iy0, iy1) = ((oy0 as isize + dy) as usize, (oy1 as isize + dy) as usize);
                    let (ix0, ix1) = ((ox0 as isize + dx) as usize, (ox1 as isize + dx) as usize);
                    let g_win = g_c.slice(s![oy0..oy1, ox0..ox1]);
                    gx_c.slice_mut(s![iy0..iy1, ix0..ix1]).scaled_add(k[[co, ci, ky, kx]], &g_win);
                    let mut acc = T::zero();
                    ndarray::Zip::from(&g_win)
                        .and(&x_c.slice(s![iy0..iy1, ix0..ix1]))
                        .for_each(|&g, &xv| acc += g * xv);
                    gk[[co, ci, ky, kx]] += acc;
                }
            }
        }
    }
    (gx, gk, gb)
}

/// 2x2 stride-2 transposed convolution; kernel layout [cin, cout, 2, 2].
fn conv_transpose2d_forward<T: Scalar>(
    x: ArrayView3<T>,
    k: ArrayView4<T>,
    b: &ArrayD<T>,
) -> Result<Array3<T>> {
    let (cin, h, w) = x.dim();
    let (kcin, cout, kh, kw) = k.dim();
    if kcin != cin {
        return Err(Error::dim(format!(
            "conv_transpose2d: kernel expects {kcin} input channels, input has {cin}"
        )));
    }
    if (kh, kw) != (2, 2) {
        return Err(Error::dim("conv_transpose2d: only 2x2 stride-2 kernels supported"));
    }
    if b.shape() != [cout] {
        return Err(Error::dim(format!("conv_transpose2d: bias shape {:?} != [{cout}]", b.shape())));
    }
    let mut out = Array3::<T>::zeros((cout, 2 * h, 2 * w));
    for co in 0..cout {
        let mut out_c = out.index_axis_mut(Axis(0), co);
        for ci in 0..cin {
            let x_c = x.index_axis(Axis(0), ci);
            for dy in 0..2 {
                for dx in 0..2 {
                    out_c
                        .slice_mut(s![dy..;2, dx..;2])
                        .scaled_add(k[[ci, co, dy, dx]], &x_c);
                }
            }
        }
        let bias = b[[co]];
        out_c.mapv_inplace(|v| v + bias);
    }
    Ok(out)
}

fn conv_transpose2d_backward<T: Scalar>(
    x: ArrayView3<T>,
    k: ArrayView4<T>,
    gout: ArrayView3<T>,
) -> (Array3<T>, Array4<T>, Array1<T>) {
    let (cin, h, w) = x.dim();
    let cout = k.dim().1;
    let mut gx = Array3::<T>::zeros((cin, h, w));
    let mut gk = Array4::<T>::zeros(k.raw_dim());
    let mut gb = Array1::<T>::zeros(cout);
    for co in 0..cout {
        let g_c = gout.index_axis(Axis(0), co);
        gb[co] = g_c.iter().copied().sum();
        for ci in 0..cin {
            let x_c = x.index_axis(Axis(0), ci);
            let mut gx_c = gx.index_axis_mut(Axis(0), ci);
            for dy in 0..2 {
                for dx in 0..2 {
                    let g_win = g_c.slice(s![dy..;2, dx..;2]);
                    gx_c.scaled_add(k[[ci, co, dy, dx]], &g_win);
                    let mut acc = T::zero();
                    ndarray::Zip::from(&g_win).and(&x_c).for_each(|&g, &xv| acc += g * xv);
                    gk[[ci, co, dy, dx]] += acc;
                }
            }
        }
    }
    let _ = (h, w);
    (gx, gk, gb)
}

impl<T: Scalar> Tape<T> {
    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(format!(
                "{what}: shape mismatch {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let (va, vb) = (self.value(a), self.value(b));
        let out = &*va + &*vb;
        Ok(self.push_op(out, vec![a.0, b.0], Box::new(|g| vec![g.clone(), g.clone()])))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let (va, vb) = (self.value(a), self.value(b));
        let out = &*va * &*vb;
        let (ca, cb) = (va.clone(), vb.clone());
        Ok(self.push_op(
            out,
            vec![a.0, b.0],
            Box::new(move |g| vec![g * &*cb, g * &*ca]),
        ))
    }

    pub fn scale(&self, a: Var, c: T) -> Var {
        let va = self.value(a);
        let out = &*va * c;
        self.push_op(out, vec![a.0], Box::new(move |g| vec![g * c]))
    }

    /// Sum of all elements, as a 0-d tensor.
    pub fn sum(&self, a: Var) -> Var {
        let va = self.value(a);
        let total: T = va.iter().copied().sum();
        let out = ArrayD::from_elem(ndarray::IxDyn(&[]), total);
        let shape = va.raw_dim();
        self.push_op(
            out,
            vec![a.0],
            Box::new(move |g| {
                let gv = *g.iter().next().expect("scalar grad");
                vec![ArrayD::from_elem(shape.clone(), gv)]
            }),
        )
    }

    /// x >= 0 -> x; x < 0 -> 0.2 x. Subgradient 1 at exactly 0.
    pub fn leaky_relu(&self, a: Var) -> Var {
        let va = self.value(a);
        let slope = T::from_f64(LEAKY_SLOPE).expect("slope fits scalar");
        let out = va.mapv(|v| if v >= T::zero() { v } else { v * slope });
        let cx = va.clone();
        self.push_op(
            out,
            vec![a.0],
            Box::new(move |g| {
                let mut gx = g.clone();
                ndarray::Zip::from(&mut gx).and(&*cx).for_each(|gv, &xv| {
                    if xv < T::zero() {
                        *gv = *gv * slope;
                    }
                });
                vec![gx]
            }),
        )
    }

    /// Shape-preserving convolution (cross-correlation) with an odd square
    /// kernel [cout, cin, k, k], zero padding k/2, plus per-channel bias.
    pub fn conv2d(&self, x: Var, k: Var, b: Var) -> Result<Var> {
        let (vx, vk, vb) = (self.value(x), self.value(k), self.value(b));
        let out = conv2d_forward(view3(&vx, "conv2d input")?, view4(&vk, "conv2d kernel")?, &vb)?;
        let (cx, ck) = (vx.clone(), vk.clone());
        Ok(self.push_op(
            out.into_dyn(),
            vec![x.0, k.0, b.0],
            Box::new(move |g| {
                let gv = g.view().into_dimensionality::<Ix3>().expect("conv2d grad shape");
                let (gx, gk, gb) = conv2d_backward(
                    cx.view().into_dimensionality::<Ix3>().expect("checked"),
                    ck.view().into_dimensionality::<Ix4>().expect("checked"),
                    gv,
                );
                vec![gx.into_dyn(), gk.into_dyn(), gb.into_dyn()]
            }),
        ))
    }

    /// 2x2 stride-2 learned upsampling; kernel layout [cin, cout, 2, 2].
    pub fn conv_transpose2d(&self, x: Var, k: Var, b: Var) -> Result<Var> {
        let (vx, vk, vb) = (self.value(x), self.value(k), self.value(b));
        let out = conv_transpose2d_forward(
            view3(&vx, "conv_transpose2d input")?,
            view4(&vk, "conv_transpose2d kernel")?,
            &vb,
        )?;
        let (cx, ck) = (vx.clone(), vk.clone());
        Ok(self.push_op(
            out.into_dyn(),
            vec![x.0, k.0, b.0],
            Box::new(move |g| {
                let gv = g.view().into_dimensionality::<Ix3>().expect("tconv grad shape");
                let (gx, gk, gb) = conv_transpose2d_backward(
                    cx.view().into_dimensionality::<Ix3>().expect("checked"),
                    ck.view().into_dimensionality::<Ix4>().expect("checked"),
                    gv,
                );
                vec![gx.into_dyn(), gk.into_dyn(), gb.into_dyn()]
            }),
        ))
    }

    /// 2x2 average pooling; spatial dims must be even.
    pub fn avg_pool2(&self, x: Var) -> Result<Var> {
        let vx = self.value(x);
        let v = view3(&vx, "avg_pool2 input")?;
        let (c, h, w) = v.dim();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::dim(format!("avg_pool2 needs even dims, got {h}x{w}")));
        }
        let quarter = T::from_f64(0.25).expect("quarter fits scalar");
        let mut out = Array3::<T>::zeros((c, h / 2, w / 2));
        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            out.scaled_add(quarter, &v.slice(s![.., dy..;2, dx..;2]));
        }
        Ok(self.push_op(
            out.into_dyn(),
            vec![x.0],
            Box::new(move |g| {
                let gv = g.view().into_dimensionality::<Ix3>().expect("pool grad shape");
                let (c, hh, ww) = gv.dim();
                let mut gx = Array3::<T>::zeros((c, hh * 2, ww * 2));
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    gx.slice_mut(s![.., dy..;2, dx..;2]).scaled_add(quarter, &gv);
                }
                vec![gx.into_dyn()]
            }),
        ))
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(&self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (xa, xb) = (view3(&va, "concat lhs")?, view3(&vb, "concat rhs")?);
        let (ca, h, w) = xa.dim();
        let (cb, hb, wb) = xb.dim();
        if (h, w) != (hb, wb) {
            return Err(Error::dim(format!("concat: spatial dims {h}x{w} vs {hb}x{wb}")));
        }
        let mut out = Array3::<T>::zeros((ca + cb, h, w));
        out.slice_mut(s![..ca, .., ..]).assign(&xa);
        out.slice_mut(s![ca.., .., ..]).assign(&xb);
        Ok(self.push_op(
            out.into_dyn(),
            vec![a.0, b.0],
            Box::new(move |g| {
                let gv = g.view().into_dimensionality::<Ix3>().expect("concat grad shape");
                vec![
                    gv.slice(s![..ca, .., ..]).to_owned().into_dyn(),
                    gv.slice(s![ca.., .., ..]).to_owned().into_dyn(),
                ]
            }),
        ))
    }

    /// Per-channel normalization over the spatial dims of one instance:
    /// `(x - mu_c)/sqrt(var_c + 1e-5) * gamma_c + beta_c`.
    pub fn instance_norm(&self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        let xv = view3(&vx, "instance_norm input")?;
        let (c, h, w) = xv.dim();
        let gv = vg
            .view()
            .into_dimensionality::<Ix1>()
            .map_err(|_| Error::dim("instance_norm: gamma must be 1-d"))?;
        if gv.len() != c || vb.len() != c {
            return Err(Error::dim(format!(
                "instance_norm: affine params must have {c} channels"
            )));
        }
        let n = T::from_usize(h * w).expect("pixel count fits scalar");
        let eps = T::from_f64(INSTANCE_NORM_EPS).expect("eps fits scalar");
        let mut xhat = Array3::<T>::zeros((c, h, w));
        let mut inv_std = Array1::<T>::zeros(c);
        let mut out = Array3::<T>::zeros((c, h, w));
        for ci in 0..c {
            let xc = xv.index_axis(Axis(0), ci);
            let mean = xc.iter().copied().sum::<T>() / n;
            let var = xc.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let istd = T::one() / (var + eps).sqrt();
            inv_std[ci] = istd;
            let (gm, bt) = (gv[ci], vb[[ci]]);
            let mut xh = xhat.index_axis_mut(Axis(0), ci);
            let mut oc = out.index_axis_mut(Axis(0), ci);
            ndarray::Zip::from(&mut xh).and(&mut oc).and(&xc).for_each(|xh, o, &v| {
                let z = (v - mean) * istd;
                *xh = z;
                *o = z * gm + bt;
            });
        }
        let (cg, cxhat, cistd) = (vg.clone(), Rc::new(xhat), Rc::new(inv_std));
        Ok(self.push_op(
            out.into_dyn(),
            vec![x.0, gamma.0, beta.0],
            Box::new(move |g| {
                let gv3 = g.view().into_dimensionality::<Ix3>().expect("in grad shape");
                let (c, h, w) = gv3.dim();
                let n = T::from_usize(h * w).expect("pixel count fits scalar");
                let gamma1 = cg.view().into_dimensionality::<Ix1>().expect("checked");
                let mut gx = Array3::<T>::zeros((c, h, w));
                let mut ggamma = Array1::<T>::zeros(c);
                let mut gbeta = Array1::<T>::zeros(c);
                for ci in 0..c {
                    let gc = gv3.index_axis(Axis(0), ci);
                    let xh = cxhat.index_axis(Axis(0), ci);
                    let sum_g = gc.iter().copied().sum::<T>();
                    let mut sum_gxh = T::zero();
                    ndarray::Zip::from(&gc).and(&xh).for_each(|&g, &z| sum_gxh += g * z);
                    gbeta[ci] = sum_g;
                    ggamma[ci] = sum_gxh;
                    let coef = gamma1[ci] * cistd[ci];
                    let mean_g = sum_g / n;
                    let mean_gxh = sum_gxh / n;
                    let mut gxc = gx.index_axis_mut(Axis(0), ci);
                    ndarray::Zip::from(&mut gxc).and(&gc).and(&xh).for_each(|o, &g, &z| {
                        *o = coef * (g - mean_g - z * mean_gxh);
                    });
                }
                vec![gx.into_dyn(), ggamma.into_dyn(), gbeta.into_dyn()]
            }),
        ))
    }

    /// Mean over pixels of `sqrt(d_re^2 + d_im^2 + eps^2)` for 2-channel
    /// (real, imaginary) tensors; the eps term keeps it differentiable at 0.
    pub fn complex_l1(&self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "complex_l1")?;
        let (vp, vt) = (self.value(pred), self.value(target));
        let p = view3(&vp, "complex_l1 pred")?;
        let t = view3(&vt, "complex_l1 target")?;
        let (c, h, w) = p.dim();
        if c != 2 {
            return Err(Error::dim(format!("complex_l1 expects 2 channels, got {c}")));
        }
        let eps2 = T::from_f64(COMPLEX_L1_EPS * COMPLEX_L1_EPS).expect("eps fits scalar");
        let n = T::from_usize(h * w).expect("pixel count fits scalar");
        let mut total = T::zero();
        for y in 0..h {
            for x in 0..w {
                let dre = p[[0, y, x]] - t[[0, y, x]];
                let dim = p[[1, y, x]] - t[[1, y, x]];
                total += (dre * dre + dim * dim + eps2).sqrt();
            }
        }
        let loss = ArrayD::from_elem(ndarray::IxDyn(&[]), total / n);
        let (cp, ct) = (vp.clone(), vt.clone());
        Ok(self.push_op(
            loss,
            vec![pred.0, target.0],
            Box::new(move |g| {
                let gv = *g.iter().next().expect("scalar grad");
                let p = cp.view().into_dimensionality::<Ix3>().expect("checked");
                let t = ct.view().into_dimensionality::<Ix3>().expect("checked");
                let (_, h, w) = p.dim();
                let n = T::from_usize(h * w).expect("pixel count fits scalar");
                let mut gp = Array3::<T>::zeros(p.raw_dim());
                for y in 0..h {
                    for x in 0..w {
                        let dre = p[[0, y, x]] - t[[0, y, x]];
                        let dim = p[[1, y, x]] - t[[1, y, x]];
                        let r = (dre * dre + dim * dim + eps2).sqrt();
                        let scale = gv / (r * n);
                        gp[[0, y, x]] = dre * scale;
                        gp[[1, y, x]] = dim * scale;
                    }
                }
                let gt = gp.mapv(|v| -v);
                vec![gp.into_dyn(), gt.into_dyn()]
            }),
        ))
    }
}
