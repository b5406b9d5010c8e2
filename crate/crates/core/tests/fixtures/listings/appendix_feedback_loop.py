from utils import find, open_obj, put, close_obj, turn_on
from objects_pool import chocolate_0, microwave_owen_0, bowl_0
def robot_program():
    # if the chocolate is not smooth, heat it in the microwave for 10 seconds
    if chocolate_0.material_properties['form'] != 'smooth':
        find(obj=microwave_owen_0)
        open_obj(obj=microwave_owen_0)
        put(obj=bowl_0, target=microwave_owen_0)
        close_obj(obj=microwave_owen_0)
        turn_on(obj=microwave_owen_0, power="low", duration="10s")
robot_program()
