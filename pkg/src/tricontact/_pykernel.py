"""Pure-Python event kernel (fallback for the compiled one).

Both kernels share one signature and must produce identical output.
"""


def run_events(states, sites, draws, q, greedy, bl, br,
               new_states, right_out, left_out, count_out, phi_out):
    n = len(states)
    st = [int(s) for s in states]
    right = -1
    left = -1
    count = 0
    for i in range(n):
        if st[i] == 2:
            count += 1
            if left < 0:
                left = i
            right = i
    for k in range(len(sites)):
        x = int(sites[k])
        u = draws[k]
        old = st[x]
        a = st[x - 1] if x > 0 else bl
        b = st[x + 1] if x + 1 < n else br
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
            st[x] = new
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
                        while st[j] != 2:
                            j -= 1
                        right = j
                    if x == left:
                        j = x + 1
                        while st[j] != 2:
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
                s = st[j] if j < n else br
                code = (code << 1) | (s != 0)
            phi_out[k] = code
    for i in range(n):
        states[i] = st[i]
