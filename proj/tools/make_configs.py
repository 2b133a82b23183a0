#!/usr/bin/env python3
# Regenerates configs/*.json. Run from the repository root.

import json, sys
def grid(n, block=100.0):
    inter=[{"id":n*r+c+1,"x":block*c,"y":block*r} for r in range(n) for c in range(n)]
    segs=[]
    for r in range(n):
        for c in range(n-1):
            segs.append({"id":r*(n-1)+c+1,"a":n*r+c+1,"b":n*r+c+2})
    base=n*(n-1)
    for r in range(n-1):
        for c in range(n):
            segs.append({"id":base+r*n+c+1,"a":n*r+c+1,"b":n*(r+1)+c+1})
    return inter,segs
def h(n,r,c): return r*(n-1)+c+1
def v(n,r,c): return n*(n-1)+r*n+c+1
n=4
inter,segs=grid(n)
clusters_all=[
 {"id":1,"segment":v(n,0,1),"delta":10},
 {"id":2,"segment":h(n,1,1),"delta":10},
 {"id":3,"segment":v(n,1,2),"delta":10},
 {"id":4,"segment":h(n,2,2),"delta":10},
 {"id":5,"segment":v(n,1,1),"delta":10},
 {"id":6,"segment":h(n,2,1),"delta":10},
]
def cfg(cl, **exp):
    e={"scenarios":200,"trials":500,"window":20,"seed":1,"selection_period":1,"averaging":"linear"}
    e.update(exp)
    return {"topology":{"intersections":inter,"segments":segs,"clusters":cl,
            "source":{"segment":h(n,0,0),"offset":30.0},"destination":{"segment":h(n,3,2),"offset":70.0}},
            "channel":{"alpha_l":2.1,"alpha_n":2.1,"delta_db":10,"eta2":40,"gamma":15,"beta_m":10,
                        "sigma_xi2":20,"sigma2":1,"sigma_d2":1,"ps_dbm":80,"pc_dbm":100,"n_t":30},
            "experiment":e}
json.dump(cfg(clusters_all[:4]),open("configs/paper4.json","w"),indent=2)
json.dump(cfg(clusters_all[:2]),open("configs/paper2.json","w"),indent=2)
json.dump(cfg(clusters_all[:6]),open("configs/paper6.json","w"),indent=2)

def write(name, inter, segs, clusters, src, dst, n_t=20, **exp):
    e={"scenarios":200,"trials":50,"window":20,"seed":1}
    e.update(exp)
    json.dump({"topology":{"intersections":inter,"segments":segs,"clusters":clusters,"source":src,"destination":dst},
               "channel":{"n_t":n_t},"experiment":e},open("configs/"+name,"w"),indent=2)

inter=[{"id":i+1,"x":100.0*i,"y":0.0} for i in range(4)]
segs=[{"id":i+1,"a":i+1,"b":i+2} for i in range(3)]
write("toy_collinear.json",inter,segs,[{"id":1,"segment":2,"delta":10}],{"segment":1,"offset":50.0},{"segment":3,"offset":50.0})

inter=[{"id":1,"x":0.0,"y":0.0},{"id":2,"x":100.0,"y":0.0},{"id":3,"x":100.0,"y":100.0},{"id":4,"x":0.0,"y":100.0}]
segs=[{"id":1,"a":1,"b":2},{"id":2,"a":2,"b":3},{"id":3,"a":3,"b":4},{"id":4,"a":4,"b":1}]
write("toy_square.json",inter,segs,[{"id":1,"segment":3,"delta":10}],{"segment":1,"offset":30.0},{"segment":2,"offset":50.0})

n=3
inter,segs=grid(n)
write("toy_grid3.json",inter,segs,[{"id":1,"segment":v(n,1,2),"delta":2}],{"segment":h(n,0,0),"offset":50.0},{"segment":h(n,2,0),"offset":50.0})
