//! Scoped flush-to-zero for subnormal floats.
//!
//! Crank–Nicolson steps spread exponentially small amplitudes across the whole
//! grid, and arithmetic on subnormals is an order of magnitude slower on common
//! hardware. Values below `f64::MIN_POSITIVE` carry no physical weight here.

/// Sets flush-to-zero and denormals-are-zero on the current thread until
/// dropped. A no-op on targets without an SSE control register.
pub(crate) struct FlushSubnormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

#[cfg(target_arch = "x86_64")]
impl FlushSubnormals {
    const FTZ_DAZ: u32 = 0x8040;

    pub(crate) fn new() -> Self {
        let mut saved: u32 = 0;
        // SAFETY: reads and writes the thread-local MXCSR; only the two
        // subnormal-handling bits are changed and the original is restored.
        unsafe {
            std::arch::asm!("stmxcsr [{}]", in(reg) &mut saved, options(nostack));
            let csr = saved | Self::FTZ_DAZ;
            std::arch::asm!("ldmxcsr [{}]", in(reg) &csr, options(nostack));
        }
        Self { saved }
    }
}

#[cfg(target_arch = "x86_64")]
impl Drop for FlushSubnormals {
    fn drop(&mut self) {
        // SAFETY: restores the value captured in `new`.
        unsafe {
            std::arch::asm!("ldmxcsr [{}]", in(reg) &self.saved, options(nostack));
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
impl FlushSubnormals {
    pub(crate) fn new() -> Self {
        Self {}
    }
}
