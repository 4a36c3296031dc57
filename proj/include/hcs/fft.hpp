#pragma once

#include <mutex>
#include <vector>

#include <fftw3.h>

#include "hcs/common.hpp"

namespace hcs {

/// In-place 3D complex FFT. sign = -1 applies exp(-2 pi i j k / n) (FFTW
/// forward), sign = +1 the conjugate. Unnormalized. Plan creation is guarded
/// by a process-wide mutex; execution is thread-safe.
inline void fft3_inplace(std::vector<cplx>& data, int n0, int n1, int n2, int sign) {
    if (data.size() != std::size_t(n0) * n1 * n2)
        throw precondition_error("fft3_inplace: size mismatch");
    static std::mutex plan_mtx;
    fftw_complex* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mtx);
        plan = fftw_plan_dft_3d(n0, n1, n2, p, p,
                                sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mtx);
        fftw_destroy_plan(plan);
    }
}

}  // namespace hcs
