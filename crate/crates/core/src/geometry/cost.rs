//! Closed-form rate functions: Lagrangian, Hamiltonian, the interior and
//! sticky rates, the cone and the intrinsic cost `c(x, y)`.

use super::point::{norm_sq, HalfSpacePoint, ModelParams};
use crate::error::Result;
use crate::scalar::{Extended, Real};

/// Relaxed Lagrangian `L̄(x, q)`.
///
/// For `a ≤ 1` this is `½|q|²` everywhere. For `a > 1` the boundary value is
/// `|q|²/(2a)` for tangential `q` and `+∞` as soon as `q` has a normal
/// component; interior points always get `½|q|²`.
pub fn lagrangian<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    q: &[T],
) -> Result<Extended<T>> {
    params.check_dim(q.len())?;
    params.check_dim(x.dim())?;
    let half_sq = T::half() * norm_sq(q);
    if !params.is_sticky_regime() || !x.on_boundary() {
        return Ok(Extended::Finite(half_sq));
    }
    if q[0] != T::zero() {
        return Ok(Extended::Infinite);
    }
    Ok(Extended::Finite(half_sq / params.a))
}

/// Limiting Hamiltonian `H(x, p)`: `½|p|²` inside, `(a/2)|p'|²` on the boundary.
pub fn hamiltonian<T: Real>(params: &ModelParams<T>, x: &HalfSpacePoint<T>, p: &[T]) -> Result<T> {
    params.check_dim(p.len())?;
    params.check_dim(x.dim())?;
    if x.on_boundary() {
        Ok(T::half() * params.a * norm_sq(&p[1..]))
    } else {
        Ok(T::half() * norm_sq(p))
    }
}

/// `I_int(x, y) = ½|x - y|²`.
pub fn interior_rate<T: Real>(x: &HalfSpacePoint<T>, y: &HalfSpacePoint<T>) -> T {
    T::half() * x.distance_sq(y)
}

/// `Ī_st(x, y, L) = |x₁+y₁|²/(2(1-L)) + |x'-y'|²/(2(1+AL))` for `L ∈ [0, 1]`.
///
/// Returns `+∞` at `L = 1` unless `x₁ + y₁ = 0`.
pub fn sticky_rate_profile<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    y: &HalfSpacePoint<T>,
    level: T,
) -> T {
    let n = x.x1 + y.x1;
    let s = x.tangential_distance(y);
    let normal = if n == T::zero() {
        T::zero()
    } else {
        n * n / (T::two() * (T::one() - level))
    };
    normal + s * s / (T::two() * (T::one() + params.excess() * level))
}

/// Sticky rate `I_st(x, y) = min_L Ī_st(x, y, L)` in closed form.
pub fn sticky_rate<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    y: &HalfSpacePoint<T>,
) -> T {
    let n = x.x1 + y.x1;
    let s = x.tangential_distance(y);
    let big_a = params.excess();
    if !params.is_sticky_regime() || s * big_a.sqrt() <= n {
        T::half() * (n * n + s * s)
    } else {
        sticky_branch(params, n, s)
    }
}

/// `(1/2a)(√A n + s)²`, the through-boundary value.
fn sticky_branch<T: Real>(params: &ModelParams<T>, n: T, s: T) -> T {
    let v = params.excess().sqrt() * n + s;
    v * v / (T::two() * params.a)
}

/// Right-hand side of the cone inequality, `(1/√A)[|x₁+y₁| + 2√a √(x₁y₁)]`.
///
/// Only meaningful for `a > 1`.
pub fn cone_threshold<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    y: &HalfSpacePoint<T>,
) -> T {
    let n = x.x1 + y.x1;
    (n + T::two() * params.a.sqrt() * (x.x1 * y.x1).sqrt()) / params.excess().sqrt()
}

/// Whether the straight chord beats every through-boundary route.
pub fn cone_contains<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    y: &HalfSpacePoint<T>,
) -> Result<bool> {
    if !params.is_sticky_regime() {
        return Err(crate::error::Error::param(
            "the cone is only defined for a > 1",
        ));
    }
    Ok(in_cone(params, x, y))
}

fn in_cone<T: Real>(params: &ModelParams<T>, x: &HalfSpacePoint<T>, y: &HalfSpacePoint<T>) -> bool {
    x.tangential_distance(y) <= cone_threshold(params, x, y)
}

/// Intrinsic cost `c(x, y)`, half the squared intrinsic distance.
pub fn cost<T: Real>(params: &ModelParams<T>, x: &HalfSpacePoint<T>, y: &HalfSpacePoint<T>) -> T {
    if !params.is_sticky_regime() || in_cone(params, x, y) {
        interior_rate(x, y)
    } else {
        sticky_branch(params, x.x1 + y.x1, x.tangential_distance(y))
    }
}

/// Intrinsic distance `√(2 c(x, y))`.
pub fn distance<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    y: &HalfSpacePoint<T>,
) -> T {
    (T::two() * cost(params, x, y)).sqrt()
}
