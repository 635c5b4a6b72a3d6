"""
URL configuration for pfdiffkit project.

Only the admin is mounted; recorded runs are browsed there.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
