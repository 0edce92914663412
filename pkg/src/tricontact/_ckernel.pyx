# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event kernel; mirrors ``_pykernel.run_events`` exactly."""


def run_events(signed char[::1] states, const long long[::1] sites, const double[::1] draws,
               double q, int greedy, int bl, int br,
               signed char[::1] new_states, long long[::1] right_out, long long[::1] left_out,
               long long[::1] count_out, signed char[::1] phi_out):
    cdef Py_ssize_t n = states.shape[0]
    cdef Py_ssize_t m = sites.shape[0]
    cdef Py_ssize_t i, j, k, x
    cdef long long right = -1, left = -1, count = 0
    cdef int a, b, prod, old, new, r, code, s
    cdef double u
    for i in range(n):
        if states[i] == 2:
            count += 1
            if left < 0:
                left = i
            right = i
    for k in range(m):
        x = sites[k]
        u = draws[k]
        old = states[x]
        a = states[x - 1] if x > 0 else bl
        b = states[x + 1] if x + 1 < n else br
        prod = a * b
        if prod == 0:
            new = 0 if u < q else 1
        elif prod >= 2:
            if greedy or old == 2:
                new = 2
            else:
                r = 0 if u < q else 1
                new = 2 if r != old else old
        else:
            new = old
        if new != old:
            states[x] = new
            if new == 2:
                count += 1
                if x > right:
                    right = x
                if left < 0 or x < left:
                    left = x
            elif old == 2:
                count -= 1
                if count == 0:
                    right = -1
                    left = -1
                else:
                    if x == right:
                        j = x - 1
                        while states[j] != 2:
                            j -= 1
                        right = j
                    if x == left:
                        j = x + 1
                        while states[j] != 2:
                            j += 1
                        left = j
        new_states[k] = new
        right_out[k] = right
        left_out[k] = left
        count_out[k] = count
        if right < 0:
            phi_out[k] = -1
        else:
            code = 0
            for j in range(right + 1, right + 5):
                s = states[j] if j < n else br
                code = (code << 1) | (s != 0)
            phi_out[k] = code
