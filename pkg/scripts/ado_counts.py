"""Print the ADO-count table for the Anderson-impurity example (56 fermionic exponents)."""
from heom.config import build_model, bundled_config
from heom.hierarchy import count_space

THRESHOLDS = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 0.0]


def main():
    model = build_model(bundled_config("example1"), 0.0)
    fer = [e for b in model.baths for e in b.exponents]
    print("n_max " + " ".join(f"{t:>10g}" for t in THRESHOLDS))
    for n_max in range(1, 7):
        # pruned enumeration above tier 4 takes a while; the I_th = 0 column is closed form
        row = [count_space(0, len(fer), 0, n_max, t, ([], fer)) if t > 0 else
               count_space(0, len(fer), 0, n_max) for t in THRESHOLDS]
        print(f"{n_max:>5} " + " ".join(f"{c:>10d}" for c in row), flush=True)


if __name__ == "__main__":
    main()
