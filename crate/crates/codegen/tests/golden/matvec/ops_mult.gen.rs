// @generated by dslgen. Do not edit.

/// `mult(m: Matrix, v: Vector) -> Vector`
#[allow(non_camel_case_types)]
pub struct Op_mult;

#[allow(unused_variables, clippy::needless_return)]
impl Op_mult {
    pub fn compute_value(m: &Matrix, v: &Vector) -> Vector {
        return m * v;
    }

    pub fn diff_b_m(m: &Matrix, v: &Vector, r: &Vector, r_b: &Vector) -> Matrix {
        return r_b * v.transpose();
    }

    pub fn diff_b_v(m: &Matrix, v: &Vector, r: &Vector, r_b: &Vector) -> Vector {
        return m.transpose() * r_b;
    }
}

impl ::dslad::DslOpDef for Op_mult {
    fn descriptor() -> ::dslad::DslOpDescriptor {
        use ::dslad::dsl::{arg, value};
        use ::std::any::Any;

        fn primal(a: &[&dyn Any]) -> Box<dyn Any> {
            Box::new(Op_mult::compute_value(arg::<Matrix>(a, 0), arg::<Vector>(a, 1)))
        }
        fn reverse_m(a: &[&dyn Any], r: &dyn Any, r_b: &dyn Any) -> Box<dyn Any> {
            Box::new(Op_mult::diff_b_m(arg::<Matrix>(a, 0), arg::<Vector>(a, 1), value::<Vector>(r), value::<Vector>(r_b)))
        }
        fn reverse_v(a: &[&dyn Any], r: &dyn Any, r_b: &dyn Any) -> Box<dyn Any> {
            Box::new(Op_mult::diff_b_v(arg::<Matrix>(a, 0), arg::<Vector>(a, 1), value::<Vector>(r), value::<Vector>(r_b)))
        }
        ::dslad::DslOpDescriptor::new::<Vector>("mult", primal)
            .arg::<Matrix>("m", Some(reverse_m))
            .arg::<Vector>("v", Some(reverse_v))
    }
}

/// `mult` with all arguments active.
#[allow(non_camel_case_types)]
#[derive(Clone)]
pub struct E_mult_MatVec_AA<E_m, E_v> {
    pub m: E_m,
    pub v: E_v,
}

#[allow(non_camel_case_types)]
impl<E_m: MatrixExpr, E_v: VectorExpr> ::dslad::DslExpr for E_mult_MatVec_AA<E_m, E_v> {
    type Value = Vector;

    fn value(&self) -> Vector {
        Op_mult::compute_value(&self.m.value(), &self.v.value())
    }

    fn record(&self, rec: &mut ::dslad::ExprRecorder<'_>) -> Result<::dslad::Recorded<Vector>, ::dslad::TapeError> {
        let mark = rec.mark();
        let arg_m = self.m.record(rec)?;
        let arg_v = self.v.record(rec)?;
        let value = Op_mult::compute_value(&arg_m.value, &arg_v.value);
        let active = rec.op::<Op_mult, Vector>(mark, &[arg_m.active, arg_v.active], &value)?;
        Ok(::dslad::Recorded { value, active })
    }
}

#[allow(non_camel_case_types)]
impl<E_m: MatrixExpr, E_v: VectorExpr> VectorExpr for E_mult_MatVec_AA<E_m, E_v> {}

/// `mult` with `v` passive.
#[allow(non_camel_case_types)]
#[derive(Clone)]
pub struct E_mult_MatVec_AP<E_m> {
    pub m: E_m,
    pub v: Vector,
}

#[allow(non_camel_case_types)]
impl<E_m: MatrixExpr> ::dslad::DslExpr for E_mult_MatVec_AP<E_m> {
    type Value = Vector;

    fn value(&self) -> Vector {
        Op_mult::compute_value(&self.m.value(), &self.v)
    }

    fn record(&self, rec: &mut ::dslad::ExprRecorder<'_>) -> Result<::dslad::Recorded<Vector>, ::dslad::TapeError> {
        let mark = rec.mark();
        let arg_m = self.m.record(rec)?;
        let arg_v = rec.passive(self.v.clone())?;
        let value = Op_mult::compute_value(&arg_m.value, &arg_v.value);
        let active = rec.op::<Op_mult, Vector>(mark, &[arg_m.active, arg_v.active], &value)?;
        Ok(::dslad::Recorded { value, active })
    }
}

#[allow(non_camel_case_types)]
impl<E_m: MatrixExpr> VectorExpr for E_mult_MatVec_AP<E_m> {}

/// `mult` with `m` passive.
#[allow(non_camel_case_types)]
#[derive(Clone)]
pub struct E_mult_MatVec_PA<E_v> {
    pub m: Matrix,
    pub v: E_v,
}

#[allow(non_camel_case_types)]
impl<E_v: VectorExpr> ::dslad::DslExpr for E_mult_MatVec_PA<E_v> {
    type Value = Vector;

    fn value(&self) -> Vector {
        Op_mult::compute_value(&self.m, &self.v.value())
    }

    fn record(&self, rec: &mut ::dslad::ExprRecorder<'_>) -> Result<::dslad::Recorded<Vector>, ::dslad::TapeError> {
        let mark = rec.mark();
        let arg_m = rec.passive(self.m.clone())?;
        let arg_v = self.v.record(rec)?;
        let value = Op_mult::compute_value(&arg_m.value, &arg_v.value);
        let active = rec.op::<Op_mult, Vector>(mark, &[arg_m.active, arg_v.active], &value)?;
        Ok(::dslad::Recorded { value, active })
    }
}

#[allow(non_camel_case_types)]
impl<E_v: VectorExpr> VectorExpr for E_mult_MatVec_PA<E_v> {}

/// Argument tuples accepted by [`mult`]; selects the expression variant.
#[allow(non_camel_case_types)]
pub trait Args_mult {
    type Output;
    fn build(self) -> Self::Output;
}

#[allow(non_camel_case_types)]
impl<E_m: MatrixExpr, E_v: VectorExpr> Args_mult for (E_m, E_v) {
    type Output = E_mult_MatVec_AA<E_m, E_v>;

    fn build(self) -> Self::Output {
        E_mult_MatVec_AA { m: self.0, v: self.1 }
    }
}

#[allow(non_camel_case_types)]
impl<E_m: MatrixExpr> Args_mult for (E_m, Vector) {
    type Output = E_mult_MatVec_AP<E_m>;

    fn build(self) -> Self::Output {
        E_mult_MatVec_AP { m: self.0, v: self.1 }
    }
}

#[allow(non_camel_case_types)]
impl<E_v: VectorExpr> Args_mult for (Matrix, E_v) {
    type Output = E_mult_MatVec_PA<E_v>;

    fn build(self) -> Self::Output {
        E_mult_MatVec_PA { m: self.0, v: self.1 }
    }
}

/// `mult` as an expression; each argument is an active expression or a passive value.
#[allow(non_camel_case_types)]
pub fn mult<A_m, A_v>(m: A_m, v: A_v) -> <(A_m, A_v) as Args_mult>::Output
where
    (A_m, A_v): Args_mult,
{
    Args_mult::build((m, v))
}
