//! Recurrences on `P_k` and `P⁽¹⁾_k` with the auxiliary vectors `z_k`.

use super::{dot_scale, Advance, Ctx, Guard, StepResult};
use crate::linalg::{combine, dot, matvec, matvec_t, norm2, Scalar, Vector};

pub(crate) struct A8B10 {
    y: Vector,
    z: Vector,
}

pub(crate) struct Pending {
    a: Scalar,
    /// `None` once the residual has met the tolerance.
    next: Option<Next>,
}

struct Next {
    y: Vector,
    z: Vector,
    b1: Scalar,
    c1: Scalar,
}

impl Pending {
    pub(crate) fn coefficients(&self) -> (Scalar, Scalar, Scalar) {
        match &self.next {
            Some(n) => (self.a, n.b1, n.c1),
            None => (self.a, f64::NAN, f64::NAN),
        }
    }
}

impl A8B10 {
    /// `z_0 = r_0`.
    pub(crate) fn new(y: Vector, r0: Vector) -> Self {
        A8B10 { y, z: r0 }
    }

    pub(crate) fn advance(
        &self,
        ctx: &Ctx<'_>,
        guard: &mut Guard,
        x: &Vector,
        r: &Vector,
    ) -> StepResult<Advance<Pending>> {
        let az = matvec(ctx.a, &self.z)?;
        let yaz = guard.check(
            "A8B10.(y_k,Az_k)",
            dot(&self.y, &az)?,
            dot_scale(&self.y, &az),
        )?;
        let yr = dot(&self.y, r)?;
        let a = guard.finite("A8B10.A", -yr / yaz)?;
        let r_new = combine(&[1.0, a], &[r, &az])?;
        let x_new = combine(&[1.0, -a], &[x, &self.z])?;

        let next = if norm2(&r_new) > ctx.tol {
            let y = matvec_t(ctx.a, &self.y)?;
            // C¹ = 1/A_{k+1} = -(y_k,Az_k)/(y_k,r_k); z_k carries an arbitrary
            // scale, so A_{k+1} itself is not judged against a fixed level.
            guard.check("A8B10.(y_k,r_k)", yr, dot_scale(&self.y, r))?;
            let c1 = guard.finite("A8B10.C1", 1.0 / a)?;
            let b1 = guard.finite("A8B10.B1", -c1 * dot(&y, &r_new)? / yaz)?;
            let z = combine(&[b1, c1], &[&self.z, &r_new])?;
            Some(Next { y, z, b1, c1 })
        } else {
            None
        };

        Ok(Advance {
            x: x_new,
            r: r_new,
            pending: Pending { a, next },
        })
    }

    pub(crate) fn commit(&mut self, adv: Advance<Pending>, x: &mut Vector, r: &mut Vector) {
        let Advance {
            x: x_new,
            r: r_new,
            pending,
        } = adv;
        if let Some(next) = pending.next {
            self.y = next.y;
            self.z = next.z;
        }
        *x = x_new;
        *r = r_new;
    }
}
