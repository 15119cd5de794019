"""Open-loop step response of the simulator, with and without an object."""
import numpy as np

from softkoop.plant import PlantParams, get_object, idle_state, step, steady_bend

params = PlantParams(noise_std=0.0)
for obj in (None, get_object(3)):
    s = idle_state(params, obj)
    thetas = []
    for _ in range(12):
        s = step(s, params, [0.35, 0.35], obj)
        thetas.append(s.theta[0])
    label = "free" if obj is None else f"object {obj.id}"
    print(f"{label:9s} theta_1: {np.round(thetas[::2], 3)}  force {s.contact_force.round(3)}")
print("free steady bend at 35% PWM:", round(steady_bend(0.35, params), 4))
