//! Three-term recurrence `P_{k+1} = A_{k+1}[(x + B_{k+1}) P_k + E_{k+1} P_{k-1}]`.

use super::{dot_scale, Advance, Ctx, Guard, StepResult};
use crate::linalg::{combine, dot, matvec, matvec_t, Scalar, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A4Coefficients {
    pub a: Scalar,
    pub b: Scalar,
    pub e: Scalar,
}

struct Previous {
    x: Vector,
    r: Vector,
    /// `(y_{k-1}, r_{k-1})` and its scale, cached from the previous step.
    yr: Scalar,
    yr_scale: Scalar,
}

pub(crate) struct A4 {
    y: Vector,
    prev: Option<Previous>,
}

pub(crate) struct Pending {
    coeffs: A4Coefficients,
    y_next: Vector,
    yr: Scalar,
    yr_scale: Scalar,
}

impl Pending {
    pub(crate) fn coefficients(&self) -> A4Coefficients {
        self.coeffs
    }
}

impl A4 {
    pub(crate) fn new(y: Vector) -> Self {
        A4 { y, prev: None }
    }

    pub(crate) fn advance(
        &self,
        ctx: &Ctx<'_>,
        guard: &mut Guard,
        x: &Vector,
        r: &Vector,
    ) -> StepResult<Advance<Pending>> {
        let yr = dot(&self.y, r)?;
        let yr_scale = dot_scale(&self.y, r);

        // E_1 = 0
        let e = match &self.prev {
            Some(prev) => {
                let d = guard.check("A4.E: (y_{k-1},r_{k-1})", prev.yr, prev.yr_scale)?;
                guard.finite("A4.E", -yr / d)?
            }
            None => 0.0,
        };

        let ar = matvec(ctx.a, r)?;
        let yar = dot(&self.y, &ar)?;
        let yr_prev = match &self.prev {
            Some(prev) => dot(&self.y, &prev.r)?,
            None => 0.0,
        };
        let d = guard.check("A4.B: (y_k,r_k)", yr, yr_scale)?;
        let b = guard.finite("A4.B", -(yar + e * yr_prev) / d)?;
        let sum = guard.check("A4.A: B+E", b + e, b.abs() + e.abs())?;
        let a = guard.finite("A4.A", 1.0 / sum)?;

        let (x_new, r_new) = match &self.prev {
            Some(prev) => (
                combine(&[b, e, -1.0], &[x, &prev.x, r])?.scale(a)?,
                combine(&[1.0, b, e], &[&ar, r, &prev.r])?.scale(a)?,
            ),
            None => (
                combine(&[b, -1.0], &[x, r])?.scale(a)?,
                combine(&[1.0, b], &[&ar, r])?.scale(a)?,
            ),
        };
        let y_next = matvec_t(ctx.a, &self.y)?;

        Ok(Advance {
            x: x_new,
            r: r_new,
            pending: Pending {
                coeffs: A4Coefficients { a, b, e },
                y_next,
                yr,
                yr_scale,
            },
        })
    }

    pub(crate) fn commit(&mut self, adv: Advance<Pending>, x: &mut Vector, r: &mut Vector) {
        let Advance {
            x: x_new,
            r: r_new,
            pending,
        } = adv;
        let x_old = std::mem::replace(x, x_new);
        let r_old = std::mem::replace(r, r_new);
        self.y = pending.y_next;
        self.prev = Some(Previous {
            x: x_old,
            r: r_old,
            yr: pending.yr,
            yr_scale: pending.yr_scale,
        });
    }
}
