"""Servicios del motor: operadores, planificador, dataset y laboratorio de información."""
