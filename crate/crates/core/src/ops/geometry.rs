use alloc::format;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    /// Zero padding so that `out = ceil(in / stride)`; an odd total pad puts
    /// the extra row/column at the bottom/right.
    Same,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvGeometry {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvGeometry {
    pub fn new(kernel_h: usize, kernel_w: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kernel_h,
            kernel_w,
            stride,
            padding,
        }
    }

    pub fn square(kernel: usize, stride: usize, padding: Padding) -> Self {
        Self::new(kernel, kernel, stride, padding)
    }

    fn check(&self) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride == 0 {
            return Err(Error::Geometry(format!(
                "kernel {}x{} stride {} must be positive",
                self.kernel_h, self.kernel_w, self.stride
            )));
        }
        Ok(())
    }

    /// Output length and leading pad along one axis.
    pub fn axis(&self, input: usize, kernel: usize) -> Result<(usize, usize)> {
        self.check()?;
        if input == 0 {
            return Err(Error::Geometry("input dimension must be positive".into()));
        }
        match self.padding {
            Padding::Valid => {
                if input < kernel {
                    return Err(Error::Geometry(format!(
                        "valid padding: kernel {kernel} larger than input {input}"
                    )));
                }
                Ok(((input - kernel) / self.stride + 1, 0))
            }
            Padding::Same => {
                let out = input.div_ceil(self.stride);
                let total = ((out - 1) * self.stride + kernel).saturating_sub(input);
                Ok((out, total / 2))
            }
        }
    }

    /// `(out_h, out_w, pad_top, pad_left)`.
    pub fn output(&self, h: usize, w: usize) -> Result<(usize, usize, usize, usize)> {
        let (oh, pt) = self.axis(h, self.kernel_h)?;
        let (ow, pl) = self.axis(w, self.kernel_w)?;
        Ok((oh, ow, pt, pl))
    }
}
