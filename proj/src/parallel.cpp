#include "bonsai/parallel.hpp"

#include <omp.h>

namespace bonsai {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

}  // namespace bonsai
