//! Recurrence `P_k = A_k[(x² + B_k x + C_k) P_{k-2} + (F_k x + G_k) P_{k-3}]`.
//!
//! The prologue builds `P_1` and `P_2` directly from the moments
//! `c_i = (y, Aⁱ r_0)`; the main loop then needs the last three residuals and
//! iterates and the shadow vectors `y_{k-3} .. y_k`.

use super::{dot_scale, Advance, Ctx, Guard, StepResult};
use crate::linalg::{combine, dot, matvec, matvec_t, norm2, Scalar, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A12Coefficients {
    pub a: Scalar,
    pub b: Scalar,
    pub c: Scalar,
    pub f: Scalar,
    pub g: Scalar,
}

pub(crate) struct A12 {
    /// `[x_{k-3}, x_{k-2}, x_{k-1}]`; the newest is also the state's `x`.
    xs: [Vector; 3],
    /// `[r_{k-3}, r_{k-2}, r_{k-1}]`.
    rs: [Vector; 3],
    /// `[y_{k-3}, y_{k-2}, y_{k-1}, y_k]`.
    ys: [Vector; 4],
}

pub(crate) struct Pending {
    coeffs: A12Coefficients,
    y_next: Vector,
}

impl Pending {
    pub(crate) fn coefficients(&self) -> A12Coefficients {
        self.coeffs
    }
}

impl A12 {
    /// Runs the prologue, leaving `x`/`r` at `x_2`/`r_2` (or at `x_1`/`r_1`
    /// when that already meets the tolerance).
    pub(crate) fn start(
        ctx: &Ctx<'_>,
        guard: &mut Guard,
        y: &Vector,
        x: &mut Vector,
        r: &mut Vector,
        iterations: &mut usize,
    ) -> StepResult<A12> {
        let x0 = x.clone();
        let r0 = r.clone();
        let p = matvec(ctx.a, &r0)?;
        let p1 = matvec(ctx.a, &p)?;
        let p2 = matvec(ctx.a, &p1)?;
        let c0 = dot(y, &r0)?;
        let c1 = dot(y, &p)?;
        let c2 = dot(y, &p1)?;
        let c3 = dot(y, &p2)?;

        let c1 = guard.check("A12.c1: (y,Ar_0)", c1, dot_scale(y, &p))?;
        let ratio = guard.finite("A12.c0/c1", c0 / c1)?;
        let r1 = combine(&[1.0, -ratio], &[&r0, &p])?;
        let x1 = combine(&[1.0, ratio], &[&x0, &r0])?;
        if norm2(&r1) <= ctx.tol {
            *x = x1;
            *r = r1;
            *iterations += 1;
            // converged; the windows are never used again
            return Ok(A12 {
                xs: [x0.clone(), x0.clone(), x0],
                rs: [r0.clone(), r0.clone(), r0],
                ys: [y.clone(), y.clone(), y.clone(), y.clone()],
            });
        }

        let delta = guard.check(
            "A12.delta: c1*c3-c2^2",
            c1 * c3 - c2 * c2,
            (c1 * c3).abs() + c2 * c2,
        )?;
        let alpha = guard.finite("A12.alpha", (c0 * c3 - c1 * c2) / delta)?;
        let beta = guard.finite("A12.beta", (c0 * c2 - c1 * c1) / delta)?;
        let r2 = combine(&[1.0, -alpha, beta], &[&r0, &p, &p1])?;
        let x2 = combine(&[1.0, alpha, -beta], &[&x0, &r0, &p])?;

        let y1 = matvec_t(ctx.a, y)?;
        let y2 = matvec_t(ctx.a, &y1)?;
        let y3 = matvec_t(ctx.a, &y2)?;

        *x = x2.clone();
        *r = r2.clone();
        *iterations += 2;
        Ok(A12 {
            xs: [x0, x1, x2],
            rs: [r0, r1, r2],
            ys: [y.clone(), y1, y2, y3],
        })
    }

    pub(crate) fn advance(
        &self,
        ctx: &Ctx<'_>,
        guard: &mut Guard,
        _x: &Vector,
        _r: &Vector,
    ) -> StepResult<Advance<Pending>> {
        let [x_k3, x_k2, _] = &self.xs;
        let [r_k3, r_k2, _] = &self.rs;
        let [y_k3, y_k2, y_k1, y_k] = &self.ys;

        let y_next = matvec_t(ctx.a, y_k)?;
        let q1 = matvec(ctx.a, r_k2)?;
        let q2 = matvec(ctx.a, &q1)?;
        let q3 = matvec(ctx.a, r_k3)?;

        let a11 = dot(y_k2, r_k2)?;
        let a13 = dot(y_k3, r_k3)?;
        let a21 = dot(y_k1, r_k2)?;
        let a22 = a11;
        let a23 = dot(y_k2, r_k3)?;
        let a31 = dot(y_k, r_k2)?;
        let a32 = a21;
        let a33 = dot(y_k1, r_k3)?;
        let s = dot(&y_next, r_k2)?;
        let t = dot(y_k, r_k3)?;

        let d13 = guard.check("A12.a13: (y_{k-3},r_{k-3})", a13, dot_scale(y_k3, r_k3))?;
        let f = guard.finite("A12.F", -a11 / d13)?;
        let b1 = -a21 - a23 * f;
        let b2 = -a31 - a33 * f;
        let b3 = -s - t * f;

        let minor1 = a22 * a33 - a32 * a23;
        let minor2 = a21 * a32 - a31 * a22;
        let delta = guard.check(
            "A12.Delta_k",
            a11 * minor1 + a13 * minor2,
            a11.abs() * ((a22 * a33).abs() + (a32 * a23).abs())
                + a13.abs() * ((a21 * a32).abs() + (a31 * a22).abs()),
        )?;
        let b = guard.finite("A12.B", (b1 * minor1 + a13 * (b2 * a32 - b3 * a22)) / delta)?;
        let g = guard.finite("A12.G", (b1 - a11 * b) / d13)?;
        let d22 = guard.check("A12.a22: (y_{k-2},r_{k-2})", a22, dot_scale(y_k2, r_k2))?;
        let c = guard.finite("A12.C", (b2 - a21 * b - a23 * g) / d22)?;
        let sum = guard.check("A12.Ak: C_k+G_k", c + g, c.abs() + g.abs())?;
        let a = guard.finite("A12.A", 1.0 / sum)?;

        let r_new = combine(&[1.0, b, c, f, g], &[&q2, &q1, r_k2, &q3, r_k3])?.scale(a)?;
        let x_new = combine(&[c, g, -1.0, -b, -f], &[x_k2, x_k3, &q1, r_k2, r_k3])?.scale(a)?;

        Ok(Advance {
            x: x_new,
            r: r_new,
            pending: Pending {
                coeffs: A12Coefficients { a, b, c, f, g },
                y_next,
            },
        })
    }

    pub(crate) fn commit(&mut self, adv: Advance<Pending>, x: &mut Vector, r: &mut Vector) {
        let Advance {
            x: x_new,
            r: r_new,
            pending,
        } = adv;
        self.xs.rotate_left(1);
        self.xs[2] = x_new.clone();
        self.rs.rotate_left(1);
        self.rs[2] = r_new.clone();
        self.ys.rotate_left(1);
        self.ys[3] = pending.y_next;
        *x = x_new;
        *r = r_new;
    }
}
