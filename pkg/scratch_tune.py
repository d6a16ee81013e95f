"""Scratch: probe training dynamics across seeds/modes (not part of the package)."""
import itertools
import sys
import time

import numpy as np

from udalab.scenario import ScenarioConfig, build_scenario
from udalab.trainer import TrainConfig, fit, source_error, resolve_w0, classify
from udalab.evaluation import infer_batch, uda_accuracy, collect_weight_groups

T_STAR = np.array([0.5944, -0.1874])  # common-class LSQ compensation at sep=2


def run(seed, mode, lr=0.2, steps=1500, sep=2.0, kappa=0.75, w0=None, lam=1.0):
    trans = tuple(kappa * T_STAR * (sep / 2.0))
    scfg = ScenarioConfig(seed=seed, class_separation=sep, translation=trans)
    src, tgt, ls = build_scenario(scfg)
    tcfg = TrainConfig(max_steps=steps, learning_rate=lr, mode=mode, seed=seed,
                       w0=w0, grl_lambda=lam)
    model, reg, trace = fit(src, tgt, tcfg)
    preds = infer_batch(model, tgt.features, 0.5)
    report = uda_accuracy(preds, tgt.labels, ls, 0.5)
    w0r = resolve_w0(tcfg, ls)
    groups = collect_weight_groups(model, reg, src, tgt, w0r)
    conf = classify(model, tgt.features).max(axis=1)
    conf_by_class = {c: conf[tgt.labels == c].mean() for c in sorted(set(tgt.labels))}
    return dict(acc=report.averaged_accuracy, per_class=report.per_class_accuracy,
                reg=reg.vector, groups=groups, conf=conf_by_class)


def summarize(kappa, lr, lam=1.0, sep=2.0, steps=1500, seeds=range(4), verbose=False):
    out = {}
    for mode in ["source_only", "unweighted_adversarial", "suan"]:
        accs, ws_gaps, wt_gaps, pcs = [], [], [], []
        for s in seeds:
            r = run(s, mode, lr=lr, steps=steps, sep=sep, kappa=kappa, lam=lam)
            accs.append(r["acc"])
            pcs.append(r["per_class"])
            g = r["groups"]
            ws_gaps.append(g["source_shared"].mean() - g["source_private"].mean())
            wt_gaps.append(g["target_shared"].mean() - g["target_private"].mean())
            if verbose and mode == "suan":
                cf = {k: round(v, 2) for k, v in r["conf"].items()}
                print(f"    seed {s}: acc={r['acc']:.3f} reg={np.round(r['reg'],2)} conf={cf}")
        mean_pc = {k: np.mean([p.get(k, np.nan) for p in pcs]) for k in pcs[0]}
        out[mode] = dict(acc=np.mean(accs), min=min(accs), pc=mean_pc,
                         ws=min(ws_gaps), wt=min(wt_gaps))
        if verbose:
            print(f"  {mode:24s} acc={np.mean(accs):.3f} "
                  f"pc={ {k: round(v,2) for k,v in mean_pc.items()} }")
    suan, so, ua = out["suan"]["acc"], out["source_only"]["acc"], out["unweighted_adversarial"]["acc"]
    print(f"sep={sep} k={kappa} lr={lr} lam={lam}: suan={suan:.3f} so={so:.3f} unw={ua:.3f} "
          f"edge={suan - max(so, ua):+.3f} | ws_min={out['suan']['ws']:+.2f} "
          f"wt_min={out['suan']['wt']:+.2f}")
    return out


if __name__ == "__main__":
    t0 = time.time()
    args = sys.argv[1:]
    if args and args[0] == "grid":
        for sep, kappa, lr in itertools.product([2.0, 2.5, 3.0], [0.8, 1.0], [0.1, 0.3]):
            summarize(kappa, lr, sep=sep)
    else:
        sep = float(args[0]) if args else 2.0
        kappa = float(args[1]) if len(args) > 1 else 1.0
        lr = float(args[2]) if len(args) > 2 else 0.1
        lam = float(args[3]) if len(args) > 3 else 1.0
        summarize(kappa, lr, lam=lam, sep=sep, verbose=True)
    print(f"elapsed {time.time() - t0:.1f}s")
