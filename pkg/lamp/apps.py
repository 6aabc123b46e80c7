from django.apps import AppConfig


class LampConfig(AppConfig):
    name = "lamp"
    verbose_name = "LAMP graph contrastive pre-training"
