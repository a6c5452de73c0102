use crate::error::{Error, Result};

/// Coefficients of an explicit Runge-Kutta scheme
/// `kᵢ = f(t + cᵢΔt, u + Δt Σⱼ aᵢⱼ kⱼ)`, `u⁺ = u + Δt Σᵢ bᵢ kᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    /// Row-major `s × s`, strictly lower triangular.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// Weights of the embedded lower-order solution.
    pub b_hat: Option<Vec<f64>>,
    pub c: Vec<f64>,
    pub order: u32,
    pub embedded_order: Option<u32>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Last stage is evaluated at the new solution (first-same-as-last).
    pub fn is_fsal(&self) -> bool {
        let s = self.stages();
        s > 1 && self.c[s - 1] == 1.0 && self.a[s - 1][..s - 1] == self.b[..s - 1] && self.b[s - 1] == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        let bad = |m: &str| Err(Error::InvalidArgument(format!("tableau {}: {m}", self.name)));
        if self.a.len() != s || self.c.len() != s || self.a.iter().any(|r| r.len() != s) {
            return bad("inconsistent stage count");
        }
        if let Some(bh) = &self.b_hat {
            if bh.len() != s {
                return bad("embedded weights have wrong length");
            }
        }
        for i in 0..s {
            if self.a[i][i..].iter().any(|&x| x != 0.0) {
                return bad("not explicit (a_ij != 0 for j >= i)");
            }
        }
        if (self.b.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("weights do not sum to one");
        }
        Ok(())
    }

    pub fn euler() -> Self {
        Self {
            name: "Euler",
            a: vec![vec![0.0]],
            b: vec![1.0],
            b_hat: None,
            c: vec![0.0],
            order: 1,
            embedded_order: None,
        }
    }

    pub fn rk4() -> Self {
        Self {
            name: "RK4",
            a: vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            b_hat: None,
            c: vec![0.0, 0.5, 0.5, 1.0],
            order: 4,
            embedded_order: None,
        }
    }

    /// Dormand–Prince 5(4), "RK5(4)7M" (Dormand & Prince 1980).
    ///
    /// ```text
    ///  0    |
    ///  1/5  | 1/5
    ///  3/10 | 3/40        9/40
    ///  4/5  | 44/45      -56/15       32/9
    ///  8/9  | 19372/6561 -25360/2187  64448/6561 -212/729
    ///  1    | 9017/3168  -355/33      46732/5247  49/176  -5103/18656
    ///  1    | 35/384      0           500/1113    125/192 -2187/6784    11/84
    /// ------+------------------------------------------------------------------------
    ///  b    | 35/384      0           500/1113    125/192 -2187/6784    11/84    0
    ///  b̂    | 5179/57600  0           7571/16695  393/640 -92097/339200 187/2100 1/40
    /// ```
    pub fn dormand_prince() -> Self {
        let b = vec![
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        let mut last = b.clone();
        last[6] = 0.0;
        Self {
            name: "DP5",
            a: vec![
                vec![0.0; 7],
                vec![1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0, 0.0],
                vec![
                    19372.0 / 6561.0,
                    -25360.0 / 2187.0,
                    64448.0 / 6561.0,
                    -212.0 / 729.0,
                    0.0,
                    0.0,
                    0.0,
                ],
                vec![
                    9017.0 / 3168.0,
                    -355.0 / 33.0,
                    46732.0 / 5247.0,
                    49.0 / 176.0,
                    -5103.0 / 18656.0,
                    0.0,
                    0.0,
                ],
                last,
            ],
            b,
            b_hat: Some(vec![
                5179.0 / 57600.0,
                0.0,
                7571.0 / 16695.0,
                393.0 / 640.0,
                -92097.0 / 339200.0,
                187.0 / 2100.0,
                1.0 / 40.0,
            ]),
            c: vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
            order: 5,
            embedded_order: Some(4),
        }
    }
}
