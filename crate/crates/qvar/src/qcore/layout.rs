use crate::error::{QvarError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub offset: usize,
    pub width: usize,
}

/// Named registers laid out from the most significant qubit down.
///
/// Register 0 occupies the most significant bits of a basis index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    regs: Vec<Register>,
    total: usize,
}

impl RegisterLayout {
    pub fn new(spec: &[(&str, usize)]) -> Result<Self> {
        Self::with_cap(spec, crate::market::qubit_cap())
    }

    pub fn with_cap(spec: &[(&str, usize)], cap: usize) -> Result<Self> {
        let mut regs = Vec::with_capacity(spec.len());
        let mut offset = 0;
        for (name, width) in spec {
            if *width == 0 {
                return Err(QvarError::InvalidParam(format!("register {name} has zero width")));
            }
            if regs.iter().any(|r: &Register| r.name == *name) {
                return Err(QvarError::InvalidParam(format!("duplicate register {name}")));
            }
            regs.push(Register { name: name.to_string(), offset, width: *width });
            offset += width;
        }
        if offset > cap {
            return Err(QvarError::QubitBudget { need: offset, cap });
        }
        Ok(Self { regs, total: offset })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dim(&self) -> usize {
        1usize << self.total
    }

    pub fn registers(&self) -> &[Register] {
        &self.regs
    }

    pub fn get(&self, name: &str) -> Result<&Register> {
        self.regs
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| QvarError::InvalidParam(format!("unknown register {name}")))
    }

    /// Bit shift of the register's least significant qubit.
    pub fn shift(&self, reg: &Register) -> usize {
        self.total - reg.offset - reg.width
    }

    pub fn read(&self, index: usize, reg: &Register) -> usize {
        (index >> self.shift(reg)) & ((1usize << reg.width) - 1)
    }

    pub fn write(&self, index: usize, reg: &Register, value: usize) -> usize {
        let shift = self.shift(reg);
        let mask = ((1usize << reg.width) - 1) << shift;
        (index & !mask) | ((value << shift) & mask)
    }

    /// Concatenates registers into a basis index in the listed order.
    pub fn compose(&self, values: &[(&str, usize)]) -> Result<usize> {
        let mut idx = 0;
        for (name, v) in values {
            let reg = self.get(name)?;
            if *v >> reg.width != 0 {
                return Err(QvarError::InvalidParam(format!("value {v} does not fit register {name}")));
            }
            idx = self.write(idx, reg, *v);
        }
        Ok(idx)
    }
}
