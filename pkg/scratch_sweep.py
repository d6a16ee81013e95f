"""Scratch: brute-force scenario-design sweep (not part of the package)."""
import itertools
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import udalab.scenario as scen
from udalab.scenario import ScenarioConfig, build_scenario
from udalab.trainer import TrainConfig, fit, resolve_w0, classify
from udalab.evaluation import infer_batch, uda_accuracy, collect_weight_groups

LAYOUTS = {
    "interleave": [0, 6, 1, 7, 2, 8, 3, 4, 5],
    "contig": [0, 1, 2, 3, 4, 5, 6, 7, 8],
    "tblock": [0, 1, 2, 3, 6, 7, 8, 4, 5],
    "tfirst": [6, 7, 8, 0, 1, 2, 3, 4, 5],
}


def eval_config(args):
    layout, rot, tmag, tdir, sep, noise, lr, steps, seeds = args
    scen._angle_order = lambda cfg: LAYOUTS[layout]
    trans = (tmag * np.cos(np.deg2rad(tdir)), tmag * np.sin(np.deg2rad(tdir)))
    rows = {}
    for mode in ("source_only", "unweighted_adversarial", "suan"):
        accs, ws, wt_raw, errs = [], [], [], []
        for s in seeds:
            scfg = ScenarioConfig(seed=s, class_separation=sep, rotation_deg=rot,
                                  translation=trans, noise_scale=noise)
            src, tgt, ls = build_scenario(scfg)
            tcfg = TrainConfig(max_steps=steps, learning_rate=lr, mode=mode, seed=s)
            model, reg, _ = fit(src, tgt, tcfg)
            rep = uda_accuracy(infer_batch(model, tgt.features, 0.5), tgt.labels, ls, 0.5)
            accs.append(rep.averaged_accuracy)
            if mode == "suan":
                g = collect_weight_groups(model, reg, src, tgt, resolve_w0(tcfg, ls))
                ws.append(g["source_shared"].mean() - g["source_private"].mean())
                conf = classify(model, tgt.features).max(axis=1)
                cmask = np.isin(tgt.labels, ls.common)
                wt_raw.append(conf[cmask].mean() - conf[~cmask].mean())
        rows[mode] = np.mean(accs)
        if mode == "suan":
            rows["ws_min"] = min(ws)
            rows["wt_min"] = min(wt_raw)
            rows["suan_min"] = min(accs)
    edge = rows["suan"] - max(rows["source_only"], rows["unweighted_adversarial"])
    return (layout, rot, tmag, tdir, sep, noise, lr), edge, rows


def main():
    steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1200
    seeds = range(3)
    grid = []
    for layout, rot, tmag, tdir in itertools.product(
            LAYOUTS, [0.0, 15.0, 30.0], [0.6, 1.0, 1.4], [20.0, 110.0, 200.0, 290.0]):
        grid.append((layout, rot, tmag, tdir, 2.0, 0.3, 0.1, steps, seeds))
    t0 = time.time()
    results = []
    with ProcessPoolExecutor(max_workers=os.cpu_count()) as pool:
        for key, edge, rows in pool.map(eval_config, grid, chunksize=2):
            results.append((edge, key, rows))
    results.sort(key=lambda r: -(r[0] + 0.3 * min(r[2]["wt_min"], 0.2) + 0.3 * min(r[2]["ws_min"], 0.3)))
    for edge, key, rows in results[:15]:
        print(f"{key}: edge={edge:+.3f} suan={rows['suan']:.3f} (min {rows['suan_min']:.3f}) "
              f"so={rows['source_only']:.3f} unw={rows['unweighted_adversarial']:.3f} "
              f"ws_min={rows['ws_min']:+.2f} wt_min={rows['wt_min']:+.2f}")
    print(f"{len(grid)} configs, elapsed {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
