//! Coupled recurrences between the residual polynomials `P_k` and the monic
//! family `P⁽¹⁾_k`, carried through the direction vectors `p_k`.

use super::{dot_scale, Advance, Ctx, Guard, StepResult};
use crate::linalg::{combine, dot, matvec, matvec_t, norm2, Scalar, Vector};

pub(crate) struct A5B10 {
    /// `y_{k-1}`; the step forms `y_k` from it.
    y: Vector,
    /// `p_{k-1}`.
    p: Vector,
    /// `C¹_{k-2}`, or `C¹_0 = 1` before the first update.
    c1: Scalar,
    /// `A_{k-1}`, waiting to produce `C¹_{k-1} = C¹_{k-2} / A_{k-1}`.
    pending_a: Option<Scalar>,
    /// The coefficient computed by the latest step (`A_k`).
    a_last: Scalar,
}

pub(crate) struct Pending {
    y: Vector,
    p: Vector,
    c1: Scalar,
    d: Scalar,
    a: Scalar,
}

impl Pending {
    pub(crate) fn coefficients(&self) -> (Scalar, Scalar, Scalar) {
        (self.d, self.a, self.c1)
    }
}

impl A5B10 {
    /// Sets `p_0 = r_0`, `C¹_0 = 1` and takes the first step to `x_1`, `r_1`.
    pub(crate) fn start(
        ctx: &Ctx<'_>,
        guard: &mut Guard,
        y: &Vector,
        x: &mut Vector,
        r: &mut Vector,
        iterations: &mut usize,
    ) -> StepResult<A5B10> {
        let p0 = r.clone();
        let ar = matvec(ctx.a, r)?;
        let yr = dot(y, r)?;
        let yar = guard.check("A5B10.(y_0,Ar_0)", dot(y, &ar)?, dot_scale(y, &ar))?;
        let a1 = guard.finite("A5B10.A_1", -yr / yar)?;
        let r1 = combine(&[1.0, a1], &[r, &ar])?;
        let x1 = combine(&[1.0, -a1], &[x, r])?;
        *r = r1;
        *x = x1;
        *iterations += 1;
        Ok(A5B10 {
            y: y.clone(),
            p: p0,
            c1: 1.0,
            pending_a: None,
            a_last: a1,
        })
    }

    pub(crate) fn advance(
        &self,
        ctx: &Ctx<'_>,
        guard: &mut Guard,
        x: &Vector,
        r: &Vector,
    ) -> StepResult<Advance<Pending>> {
        // C¹_{k-1} = C¹_{k-2} / A_{k-1}, deferred from the end of the last step.
        let c1 = match self.pending_a {
            Some(a_prev) => {
                let a_prev = guard.check("A5B10.A_k", a_prev, 1.0)?;
                guard.finite("A5B10.C1", self.c1 / a_prev)?
            }
            None => self.c1,
        };

        let y = matvec_t(ctx.a, &self.y)?;
        let yr = dot(&y, r)?;
        let yp = dot(&y, &self.p)?;
        let den = guard.check(
            "A5B10.(y_k,p_{k-1})",
            c1 * yp,
            c1.abs() * dot_scale(&y, &self.p),
        )?;
        let d = guard.finite("A5B10.D", -yr / den)?;
        let p = combine(&[1.0, d * c1], &[r, &self.p])?;
        // Measured against the terms p_k is built from, so that a direction
        // lost to cancellation counts as a vanishing denominator.
        let p_terms = norm2(r) + (d * c1).abs() * norm2(&self.p);
        let lost = p_terms / norm2(&p);

        let ap = matvec(ctx.a, &p)?;
        let yap = guard.check("A5B10.(y_k,Ap_k)", dot(&y, &ap)?, dot_scale(&y, &ap) * lost)?;
        let a = guard.finite("A5B10.A", -yr / yap)?;
        let r_new = combine(&[1.0, a], &[r, &ap])?;
        let x_new = combine(&[1.0, -a], &[x, &p])?;

        Ok(Advance {
            x: x_new,
            r: r_new,
            pending: Pending { y, p, c1, d, a },
        })
    }

    pub(crate) fn commit(&mut self, adv: Advance<Pending>, x: &mut Vector, r: &mut Vector) {
        let Advance {
            x: x_new,
            r: r_new,
            pending,
        } = adv;
        self.y = pending.y;
        self.p = pending.p;
        self.c1 = pending.c1;
        self.pending_a = Some(self.a_last);
        self.a_last = pending.a;
        *x = x_new;
        *r = r_new;
    }
}
